#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace nulog::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: comma separated, double-quote quoting, "" as an escaped
/// quote, CRLF or LF row endings, newlines allowed inside quoted fields.
/// A leading UTF-8 byte-order mark is skipped.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const Row& row);

}  // namespace nulog::csv
