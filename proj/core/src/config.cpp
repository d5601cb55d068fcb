#include "stochhom/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace stochhom::cli {

namespace {

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& key, int line, const std::string& reason) {
    std::string msg = "config key '" + key + "': " + reason;
    if (line > 0) msg += " (line " + std::to_string(line) + ")";
    throw ConfigError(msg);
}

double parse_number(const std::string& key, int line, const std::string& value) {
    // Accepts plain decimals and fractions like "1/60".
    const auto slash = value.find('/');
    try {
        if (slash != std::string::npos) {
            const double num = std::stod(trim(value.substr(0, slash)));
            const double den = std::stod(trim(value.substr(slash + 1)));
            if (den == 0.0) fail(key, line, "division by zero in fraction");
            return num / den;
        }
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (trim(value.substr(used)) != "") fail(key, line, "malformed number '" + value + "'");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail(key, line, "malformed number '" + value + "'");
    }
}

long long parse_int(const std::string& key, int line, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (trim(value.substr(used)) != "") fail(key, line, "malformed integer '" + value + "'");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail(key, line, "malformed integer '" + value + "'");
    }
}

bool parse_bool(const std::string& key, int line, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail(key, line, "expected true or false, got '" + value + "'");
}

// Mesh sizes are given as h = 1/n; store n.
int parse_subdivisions(const std::string& key, int line, const std::string& value) {
    const double h = parse_number(key, line, value);
    if (!(h > 0.0) || h > 0.5) fail(key, line, "mesh size must lie in (0, 1/2]");
    const double n = 1.0 / h;
    if (std::fabs(n - std::lround(n)) > 1e-9 * n)
        fail(key, line, "mesh size must be 1/n for an integer n");
    return static_cast<int>(std::lround(n));
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, int line, const std::string& value,
                          Parse parse) {
    std::vector<T> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) fail(key, line, "empty list entry");
        out.push_back(parse(key, line, item));
    }
    if (out.empty()) fail(key, line, "empty list");
    return out;
}

using Setter = std::function<void(pipeline::RunConfig&, const std::string& key, int line,
                                  const std::string& value)>;

const std::map<std::string, Setter>& key_table() {
    static const std::map<std::string, Setter> table = {
        {"test_case",
         [](auto& c, const auto& k, int l, const auto& v) {
             try {
                 c.test_case = micro::test_case_from_string(v);
             } catch (const ConfigError& e) {
                 fail(k, l, e.what());
             }
         }},
        {"epsilon",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.epsilon = parse_number(k, l, v);
         }},
        {"M",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.M = static_cast<int>(parse_int(k, l, v));
         }},
        {"f",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.f_value = parse_number(k, l, v);
         }},
        {"h",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.n_cell = parse_subdivisions(k, l, v);
         }},
        {"h0",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.n0 = parse_subdivisions(k, l, v);
         }},
        {"h1",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.n1 = parse_subdivisions(k, l, v);
         }},
        {"r",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.degree = static_cast<int>(parse_int(k, l, v));
         }},
        {"quadrature_order",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.quadrature_order = static_cast<int>(parse_int(k, l, v));
         }},
        {"n_fine",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.n_fine = static_cast<int>(parse_int(k, l, v));
         }},
        {"distribution",
         [](auto& c, const auto& k, int l, const auto& v) {
             if (v == "uniform") c.distribution = micro::Distribution::uniform;
             else if (v == "truncated_normal")
                 c.distribution = micro::Distribution::truncated_normal;
             else fail(k, l, "expected uniform or truncated_normal, got '" + v + "'");
         }},
        {"b",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.trunc_bound = parse_number(k, l, v);
         }},
        {"master_seed",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.master_seed = static_cast<std::uint64_t>(parse_int(k, l, v));
         }},
        {"diagonal_only",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.diagonal_only = parse_bool(k, l, v);
         }},
        {"fixed_geometry",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.fixed_geometry = parse_bool(k, l, v);
         }},
        {"n_ellipses",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.n_ellipses = static_cast<int>(parse_int(k, l, v));
         }},
        {"axis_min",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.axis_min = parse_number(k, l, v);
         }},
        {"axis_max",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.axis_max = parse_number(k, l, v);
         }},
        {"sample_index",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.sample_index = static_cast<int>(parse_int(k, l, v));
         }},
        {"L",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.L = static_cast<int>(parse_int(k, l, v));
         }},
        {"N",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.N = static_cast<int>(parse_int(k, l, v));
         }},
        {"L_list",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.study.L_list = parse_list<int>(k, l, v, [](const auto& kk, int ll, const auto& vv) {
                 return static_cast<int>(parse_int(kk, ll, vv));
             });
         }},
        {"M_list",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.study.M_list = parse_list<int>(k, l, v, [](const auto& kk, int ll, const auto& vv) {
                 return static_cast<int>(parse_int(kk, ll, vv));
             });
         }},
        {"scale_list",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.study.scale_list = parse_list<double>(k, l, v, parse_number);
         }},
        {"replicates",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.study.replicates = static_cast<int>(parse_int(k, l, v));
         }},
        {"samples",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.study.samples = static_cast<int>(parse_int(k, l, v));
         }},
        {"sigma",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.study.sigma = parse_number(k, l, v);
         }},
        {"workers",
         [](auto& c, const auto& k, int l, const auto& v) {
             c.workers = static_cast<int>(parse_int(k, l, v));
         }},
    };
    return table;
}

void apply_key(pipeline::RunConfig& config, const std::string& key, int line,
               const std::string& value) {
    const auto& table = key_table();
    const auto it = table.find(key);
    if (it == table.end()) fail(key, line, "unknown key");
    it->second(config, key, line, value);
}

}  // namespace

pipeline::RunConfig parse_config_text(const std::string& text,
                                      const std::vector<std::string>& overrides) {
    pipeline::RunConfig config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(line);
        const auto comment = s.find_first_of("#;");
        if (comment != std::string::npos) s = trim(s.substr(0, comment));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": malformed section header '" + s + "'");
            const std::string section = s.substr(1, s.size() - 2);
            if (section != "problem" && section != "mesh" && section != "random" &&
                section != "study")
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key = value, got '" + s + "'");
        apply_key(config, trim(s.substr(0, eq)), line_no, trim(s.substr(eq + 1)));
    }

    for (const std::string& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + ov + "' is not of the form key=value");
        apply_key(config, trim(ov.substr(0, eq)), 0, trim(ov.substr(eq + 1)));
    }

    config.validate();
    return config;
}

pipeline::RunConfig parse_config(const std::string& path,
                                 const std::vector<std::string>& overrides) {
    if (path.empty()) return parse_config_text("", overrides);
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), overrides);
}

std::string config_echo(const pipeline::RunConfig& c) {
    std::ostringstream out;
    out << "[problem]\n";
    out << "test_case = " << micro::to_string(c.test_case) << "\n";
    out << "epsilon = 1/" << c.cells_per_side() << "\n";
    out << "M = " << c.M << "\n";
    out << "f = " << fmt(c.f_value) << "\n";
    out << "\n[mesh]\n";
    out << "h = 1/" << c.cell_subdivisions() << "\n";
    out << "h0 = 1/" << c.n0 << "\n";
    out << "h1 = 1/" << c.n1 << "\n";
    out << "r = " << c.degree << "\n";
    out << "quadrature_order = " << c.quadrature_order << "\n";
    out << "n_fine = " << c.n_fine << "\n";
    out << "\n[random]\n";
    out << "distribution = "
        << (c.distribution == micro::Distribution::uniform ? "uniform" : "truncated_normal")
        << "\n";
    out << "b = " << fmt(c.trunc_bound) << "\n";
    out << "master_seed = " << c.master_seed << "\n";
    out << "diagonal_only = " << (c.diagonal_only ? "true" : "false") << "\n";
    out << "fixed_geometry = " << (c.fixed_geometry ? "true" : "false") << "\n";
    out << "n_ellipses = " << c.n_ellipses << "\n";
    out << "axis_min = " << fmt(c.axis_min) << "\n";
    out << "axis_max = " << fmt(c.axis_max) << "\n";
    out << "sample_index = " << c.sample_index << "\n";
    out << "\n[study]\n";
    out << "L = " << c.L << "\n";
    out << "N = " << c.N << "\n";
    auto join_int = [](const std::vector<int>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i)
            s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    auto join_dbl = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
        return s;
    };
    out << "L_list = " << join_int(c.study.L_list) << "\n";
    out << "M_list = " << join_int(c.study.M_list) << "\n";
    out << "scale_list = " << join_dbl(c.study.scale_list) << "\n";
    out << "replicates = " << c.study.replicates << "\n";
    out << "samples = " << c.study.samples << "\n";
    out << "sigma = " << fmt(c.study.sigma) << "\n";
    out << "workers = " << c.workers << "\n";
    return out.str();
}

int exit_code(ErrorCategory category) {
    switch (category) {
        case ErrorCategory::config: return 2;
        case ErrorCategory::solver: return 3;
        case ErrorCategory::placement: return 4;
        case ErrorCategory::io: return 5;
        case ErrorCategory::internal: return 1;
    }
    return 1;
}

}  // namespace stochhom::cli
