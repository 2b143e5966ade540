#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tabboost::csv {

using Record = std::vector<std::string>;

// RFC 4180 reader: comma separator, double-quote escaping with "" for a
// literal quote, CRLF or LF record ends. A trailing newline does not produce
// an empty record. Throws DataError on an unterminated quote.
std::vector<Record> parse(std::string_view text);

// Quotes a field when it contains a comma, quote, or line break.
std::string escape(std::string_view field);
std::string join(const Record& record);

}  // namespace tabboost::csv
