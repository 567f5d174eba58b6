#pragma once

#include <string>
#include <vector>

namespace mfrec {

// RFC-4180-style quoting; titles contain commas ("Godfather, The (1972)").
std::string csv_quote(const std::string& field);

// Splits one CSV line, honoring quotes. No multi-line fields.
std::vector<std::string> csv_split(const std::string& line);

std::string format_double(double v, int precision = 6);

}  // namespace mfrec
