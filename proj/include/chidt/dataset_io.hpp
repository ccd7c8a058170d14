#pragma once

#include <string>
#include <string_view>

#include "chidt/dataset.hpp"

namespace chidt {

struct CsvOptions {
    std::string label_column = "labels";
    char label_separator = ';';
    // Used for record ids when present; otherwise ids are 1-based row numbers.
    std::string id_column = "id";
};

// Comma-separated, RFC 4180 quoting, mandatory header. Label cells hold
// separator-joined codes, each optionally suffixed with ":PDx", ":SDx" or
// ":PROC". A column is numeric iff every cell parses as a decimal number and
// it has more than two distinct values; otherwise it is nominal with its
// values sorted (numerically when they are all numbers).
Dataset load_csv(std::string_view content, const CsvOptions& options = {});
std::string write_csv(const Dataset& ds, const CsvOptions& options = {});

// Dense ARFF with numeric and nominal attributes only. The last attribute is
// the class; each record gets its class value as a one-element label set.
Dataset load_arff_subset(std::string_view content);
// Requires every record to carry exactly one code.
std::string write_arff(const Dataset& ds);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// Shortest text that parses back to the same double.
std::string format_number(double value);

} // namespace chidt
