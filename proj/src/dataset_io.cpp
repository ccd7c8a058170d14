#include "chidt/dataset_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "chidt/error.hpp"

namespace chidt {

namespace {

std::optional<double> parse_number(std::string_view text)
{
    if (text.empty()) {
        return std::nullopt;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    double value = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

// ---- CSV -------------------------------------------------------------------

std::vector<std::vector<std::string>> parse_csv_rows(std::string_view content)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    bool row_has_data = false;
    std::size_t line = 1;

    auto end_row = [&] {
        row.push_back(std::move(cell));
        cell.clear();
        if (row_has_data || row.size() > 1 || !row.front().empty()) {
            rows.push_back(std::move(row));
        }
        row.clear();
        row_has_data = false;
    };

    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                line += c == '\n' ? 1 : 0;
                cell += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            if (!cell.empty()) {
                throw ValidationError("csv line " + std::to_string(line) + ": stray quote inside a cell");
            }
            quoted = true;
            row_has_data = true;
            break;
        case ',':
            row.push_back(std::move(cell));
            cell.clear();
            row_has_data = true;
            break;
        case '\r':
            break;
        case '\n':
            end_row();
            ++line;
            break;
        default:
            cell += c;
        }
    }
    if (quoted) {
        throw ValidationError("csv: unterminated quoted cell");
    }
    if (!cell.empty() || !row.empty() || row_has_data) {
        end_row();
    }
    return rows;
}

bool needs_quotes(std::string_view s)
{
    return s.find_first_of(",\"\r\n") != std::string_view::npos
        || (!s.empty() && (std::isspace(static_cast<unsigned char>(s.front()))
                           || std::isspace(static_cast<unsigned char>(s.back()))));
}

std::string csv_cell(std::string_view s)
{
    if (!needs_quotes(s)) {
        return std::string(s);
    }
    std::string out = "\"";
    for (const char c : s) {
        out += c;
        if (c == '"') {
            out += '"';
        }
    }
    return out + '"';
}

void parse_label_cell(std::string_view cell, char separator, const std::string& record_id, Record& record)
{
    for (const auto& token : split_labels(cell, separator)) {
        std::string_view code = token;
        std::optional<CodeRole> role;
        if (const auto colon = token.rfind(':'); colon != std::string::npos) {
            role = parse_role(trim(std::string_view(token).substr(colon + 1)));
            if (!role) {
                throw ValidationError("record '" + record_id + "': unknown role in '" + token + "'");
            }
            code = trim(std::string_view(token).substr(0, colon));
        }
        if (code.empty()) {
            throw ValidationError("record '" + record_id + "': empty code in label cell");
        }
        if (!record.labels.emplace(code).second) {
            throw ValidationError("record '" + record_id + "': duplicate code '" + std::string(code) + "'");
        }
        if (role) {
            record.roles.emplace(std::string(code), *role);
        }
    }
}

// ---- ARFF ------------------------------------------------------------------

// Splits an ARFF line into tokens: quoted strings, braces, commas and bare
// words. Comments beginning with '%' outside quotes end the line.
std::vector<std::string> arff_tokens(std::string_view line, std::size_t line_no)
{
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        const char c = line[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '%') {
            break;
        } else if (c == '{' || c == '}' || c == ',') {
            tokens.emplace_back(1, c);
            ++i;
        } else if (c == '\'' || c == '"') {
            std::string value;
            ++i;
            bool closed = false;
            while (i < line.size()) {
                if (line[i] == '\\' && i + 1 < line.size()) {
                    value += line[i + 1];
                    i += 2;
                } else if (line[i] == c) {
                    closed = true;
                    ++i;
                    break;
                } else {
                    value += line[i++];
                }
            }
            if (!closed) {
                throw ValidationError("arff line " + std::to_string(line_no) + ": unterminated quote");
            }
            // Marked so that a quoted '?' or '{' is not mistaken for syntax.
            tokens.push_back('\x01' + value);
        } else {
            std::size_t j = i;
            while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != ','
                   && line[j] != '{' && line[j] != '}' && line[j] != '%') {
                ++j;
            }
            tokens.emplace_back(line.substr(i, j - i));
            i = j;
        }
    }
    return tokens;
}

bool is_quoted(const std::string& token) { return !token.empty() && token.front() == '\x01'; }

std::string unquote(const std::string& token) { return is_quoted(token) ? token.substr(1) : token; }

std::string arff_quote(std::string_view s)
{
    const bool plain = !s.empty() && s != "?"
        && std::none_of(s.begin(), s.end(), [](char c) {
               return std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '{' || c == '}' || c == '%'
                   || c == '\'' || c == '"' || c == '\\';
           });
    if (plain) {
        return std::string(s);
    }
    std::string out = "'";
    for (const char c : s) {
        if (c == '\'' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    return out + '\'';
}

} // namespace

std::string format_number(double value)
{
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
}

Dataset load_csv(std::string_view content, const CsvOptions& options)
{
    const auto rows = parse_csv_rows(content);
    if (rows.empty() || (rows.front().size() == 1 && trim(rows.front().front()).empty())) {
        throw ValidationError("csv: empty header");
    }
    const auto& header = rows.front();
    std::optional<std::size_t> label_col;
    std::optional<std::size_t> id_col;
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == options.label_column) {
            label_col = c;
        } else if (header[c] == options.id_column) {
            id_col = c;
        } else {
            feature_cols.push_back(c);
        }
    }
    if (!label_col) {
        throw ValidationError("csv: label column '" + options.label_column + "' not found in header");
    }

    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size()) {
            throw ValidationError("csv row " + std::to_string(r + 1) + ": expected " + std::to_string(header.size())
                                  + " cells, found " + std::to_string(rows[r].size()));
        }
    }

    std::vector<AttributeMeta> attributes;
    for (const auto c : feature_cols) {
        AttributeMeta meta;
        meta.name = header[c];
        meta.index = attributes.size();
        std::set<std::string> distinct;
        bool all_numeric = true;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& cell = rows[r][c];
            if (cell.empty()) {
                throw ValidationError("csv row " + std::to_string(r + 1) + ": missing value for '" + meta.name + "'");
            }
            all_numeric = all_numeric && parse_number(cell).has_value();
            distinct.insert(cell);
        }
        if (all_numeric && distinct.size() > 2) {
            meta.kind = AttributeKind::numeric;
        } else {
            meta.kind = AttributeKind::nominal;
            meta.values.assign(distinct.begin(), distinct.end());
            if (all_numeric) {
                std::stable_sort(meta.values.begin(), meta.values.end(), [](const auto& a, const auto& b) {
                    return *parse_number(a) < *parse_number(b);
                });
            }
        }
        attributes.push_back(std::move(meta));
    }

    LabelSet alphabet;
    std::vector<Record> records;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        Record record;
        record.id = id_col ? row[*id_col] : std::to_string(r);
        if (record.id.empty()) {
            throw ValidationError("csv row " + std::to_string(r + 1) + ": empty record id");
        }
        for (std::size_t a = 0; a < attributes.size(); ++a) {
            const auto& cell = row[feature_cols[a]];
            if (attributes[a].is_nominal()) {
                record.features.push_back(static_cast<double>(*attributes[a].value_index(cell)));
            } else {
                const auto value = parse_number(cell);
                if (!value) {
                    throw ValidationError("csv row " + std::to_string(r + 1) + ": '" + cell
                                          + "' is not a number in numeric column '" + attributes[a].name + "'");
                }
                record.features.push_back(*value);
            }
        }
        parse_label_cell(row[*label_col], options.label_separator, record.id, record);
        alphabet.insert(record.labels.begin(), record.labels.end());
        records.push_back(std::move(record));
    }

    Dataset ds("", std::move(attributes), options.label_column, {alphabet.begin(), alphabet.end()},
               std::move(records));
    ds.validate();
    return ds;
}

std::string write_csv(const Dataset& ds, const CsvOptions& options)
{
    std::ostringstream out;
    out << csv_cell(options.id_column);
    for (const auto& a : ds.attributes()) {
        out << ',' << csv_cell(a.name);
    }
    out << ',' << csv_cell(options.label_column) << '\n';
    for (const auto& r : ds.records()) {
        out << csv_cell(r.id);
        for (std::size_t a = 0; a < ds.attributes().size(); ++a) {
            const auto& meta = ds.attributes()[a];
            const double v = r.features[a];
            out << ',' << csv_cell(meta.is_nominal() ? meta.values[static_cast<std::size_t>(v)] : format_number(v));
        }
        std::string labels;
        for (const auto& code : r.labels) {
            if (!labels.empty()) {
                labels += options.label_separator;
            }
            labels += code;
            if (const auto it = r.roles.find(code); it != r.roles.end()) {
                labels += ':';
                labels += to_string(it->second);
            }
        }
        out << ',' << csv_cell(labels) << '\n';
    }
    return out.str();
}

Dataset load_arff_subset(std::string_view content)
{
    std::string relation;
    std::vector<AttributeMeta> attributes;
    std::vector<std::vector<std::string>> data_rows;
    std::vector<std::size_t> data_lines;
    bool in_data = false;

    std::size_t line_no = 0;
    std::istringstream stream{std::string(content)};
    for (std::string line; std::getline(stream, line);) {
        ++line_no;
        const auto tokens = arff_tokens(line, line_no);
        if (tokens.empty()) {
            continue;
        }
        const auto keyword = lower(tokens.front());
        if (in_data) {
            if (tokens.front() == "{") {
                throw ValidationError("arff line " + std::to_string(line_no) + ": sparse rows are not supported");
            }
            std::vector<std::string> values;
            bool expect_value = true;
            for (const auto& t : tokens) {
                if (t == ",") {
                    if (expect_value) {
                        throw ValidationError("arff line " + std::to_string(line_no) + ": empty value");
                    }
                    expect_value = true;
                } else {
                    if (!expect_value) {
                        throw ValidationError("arff line " + std::to_string(line_no) + ": missing comma");
                    }
                    values.push_back(t);
                    expect_value = false;
                }
            }
            data_rows.push_back(std::move(values));
            data_lines.push_back(line_no);
        } else if (keyword == "@relation") {
            if (tokens.size() < 2) {
                throw ValidationError("arff line " + std::to_string(line_no) + ": @relation without a name");
            }
            relation = unquote(tokens[1]);
        } else if (keyword == "@attribute") {
            if (tokens.size() < 3) {
                throw ValidationError("arff line " + std::to_string(line_no) + ": incomplete @attribute");
            }
            AttributeMeta meta;
            meta.name = unquote(tokens[1]);
            meta.index = attributes.size();
            if (tokens[2] == "{") {
                meta.kind = AttributeKind::nominal;
                for (std::size_t i = 3; i < tokens.size() && tokens[i] != "}"; ++i) {
                    if (tokens[i] != ",") {
                        meta.values.push_back(unquote(tokens[i]));
                    }
                }
                if (tokens.back() != "}") {
                    throw ValidationError("arff line " + std::to_string(line_no) + ": unterminated nominal domain");
                }
            } else {
                const auto type = lower(tokens[2]);
                if (type != "numeric" && type != "real" && type != "integer") {
                    throw ValidationError("arff line " + std::to_string(line_no) + ": unsupported attribute type '"
                                          + tokens[2] + "'");
                }
                meta.kind = AttributeKind::numeric;
            }
            attributes.push_back(std::move(meta));
        } else if (keyword == "@data") {
            in_data = true;
        } else {
            throw ValidationError("arff line " + std::to_string(line_no) + ": unexpected '" + tokens.front() + "'");
        }
    }
    if (attributes.size() < 1) {
        throw ValidationError("arff: no attributes declared");
    }
    if (!attributes.back().is_nominal()) {
        throw ValidationError("arff: the class (last) attribute must be nominal");
    }

    AttributeMeta label_attr = attributes.back();
    attributes.pop_back();
    std::vector<Record> records;
    for (std::size_t r = 0; r < data_rows.size(); ++r) {
        const auto& row = data_rows[r];
        const auto where = "arff line " + std::to_string(data_lines[r]);
        if (row.size() != attributes.size() + 1) {
            throw ValidationError(where + ": expected " + std::to_string(attributes.size() + 1) + " values");
        }
        Record record;
        record.id = std::to_string(r + 1);
        for (std::size_t a = 0; a <= attributes.size(); ++a) {
            const auto& meta = a < attributes.size() ? attributes[a] : label_attr;
            if (row[a] == "?") {
                throw ValidationError(where + ": missing values are not supported");
            }
            const auto value = unquote(row[a]);
            if (meta.is_nominal()) {
                const auto idx = meta.value_index(value);
                if (!idx) {
                    throw ValidationError(where + ": value '" + value + "' outside the domain of '" + meta.name + "'");
                }
                if (a < attributes.size()) {
                    record.features.push_back(static_cast<double>(*idx));
                } else {
                    record.labels.insert(value);
                }
            } else {
                const auto number = parse_number(value);
                if (!number) {
                    throw ValidationError(where + ": '" + value + "' is not a number");
                }
                record.features.push_back(*number);
            }
        }
        records.push_back(std::move(record));
    }

    std::vector<Code> alphabet = label_attr.values;
    std::sort(alphabet.begin(), alphabet.end());
    Dataset ds(relation, std::move(attributes), label_attr.name, std::move(alphabet), std::move(records));
    ds.validate();
    return ds;
}

std::string write_arff(const Dataset& ds)
{
    std::ostringstream out;
    out << "@relation " << arff_quote(ds.name().empty() ? "dataset" : ds.name()) << "\n\n";
    for (const auto& a : ds.attributes()) {
        out << "@attribute " << arff_quote(a.name) << ' ';
        if (a.is_nominal()) {
            out << '{';
            for (std::size_t i = 0; i < a.values.size(); ++i) {
                out << (i ? "," : "") << arff_quote(a.values[i]);
            }
            out << "}\n";
        } else {
            out << "numeric\n";
        }
    }
    out << "@attribute " << arff_quote(ds.label_name()) << " {";
    for (std::size_t i = 0; i < ds.alphabet().size(); ++i) {
        out << (i ? "," : "") << arff_quote(ds.alphabet()[i]);
    }
    out << "}\n\n@data\n";
    for (const auto& r : ds.records()) {
        if (r.labels.size() != 1) {
            throw ValidationError("arff export needs exactly one code per record; '" + r.id + "' has "
                                  + std::to_string(r.labels.size()));
        }
        for (std::size_t a = 0; a < ds.attributes().size(); ++a) {
            const auto& meta = ds.attributes()[a];
            const double v = r.features[a];
            out << (meta.is_nominal() ? arff_quote(meta.values[static_cast<std::size_t>(v)]) : format_number(v))
                << ',';
        }
        out << arff_quote(*r.labels.begin()) << '\n';
    }
    return out.str();
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, std::string_view content)
{
    const auto parent = std::filesystem::path(path).parent_path();
    std::error_code ec;
    if (!parent.empty()) {
        std::filesystem::create_directories(parent, ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write '" + path + "'");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

} // namespace chidt
