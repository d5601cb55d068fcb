#pragma once

#include <string>

namespace stochhom::io {

/// Shortest round-trip decimal form, locale-independent ('.' decimal point).
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace stochhom::io
