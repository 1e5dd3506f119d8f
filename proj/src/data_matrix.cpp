#include "cellrobust/data_matrix.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "cellrobust/errors.hpp"

namespace cellrobust {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

bool is_na_token(std::string_view s) { return s.empty() || s == "NA"; }

bool parse_double(std::string_view s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return fields;
}

bool numeric_or_na(std::string_view s) {
    if (is_na_token(s)) return true;
    double dummy;
    return parse_double(s, dummy);
}

}  // namespace

Vector DataMatrix::observed_col(std::size_t j) const {
    Vector v;
    v.reserve(n());
    for (std::size_t i = 0; i < n(); ++i)
        if (!missing(i, j)) v.push_back(values(i, j));
    return v;
}

std::size_t DataMatrix::observed_count_col(std::size_t j) const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n(); ++i)
        if (!missing(i, j)) ++c;
    return c;
}

std::size_t DataMatrix::observed_count_row(std::size_t i) const {
    std::size_t c = 0;
    for (std::size_t j = 0; j < d(); ++j)
        if (!missing(i, j)) ++c;
    return c;
}

DataMatrix DataMatrix::from_matrix(Matrix m) {
    DataMatrix out;
    out.missing = BoolMat(m.rows(), m.cols());
    out.col_names = default_col_names(m.cols());
    out.row_names = default_row_names(m.rows());
    out.values = std::move(m);
    return out;
}

std::vector<std::string> default_col_names(std::size_t d) {
    std::vector<std::string> names(d);
    for (std::size_t j = 0; j < d; ++j) names[j] = "V" + std::to_string(j + 1);
    return names;
}

std::vector<std::string> default_row_names(std::size_t n) {
    std::vector<std::string> names(n);
    for (std::size_t i = 0; i < n; ++i) names[i] = std::to_string(i + 1);
    return names;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_atomic(const std::string& path, std::string_view content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open file for writing: " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw DataError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("rename failed for " + path + ": " + ec.message());
}

std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

DataMatrix parse_csv(std::string_view text, std::string_view origin) {
    std::vector<std::vector<std::string_view>> rows;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t pos = text.find('\n', start);
        if (pos == std::string_view::npos) pos = text.size();
        std::string_view line = text.substr(start, pos - start);
        if (!trim(line).empty()) rows.push_back(split_fields(line));
        start = pos + 1;
    }
    if (rows.empty()) throw DataError(std::string(origin) + ": empty CSV");

    const std::size_t width = rows[0].size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != width) {
            std::ostringstream msg;
            msg << origin << ": row " << (i + 1) << " has " << rows[i].size()
                << " fields, expected " << width;
            throw DataError(msg.str());
        }
    }

    bool has_header = false;
    for (const auto& f : rows[0])
        if (!numeric_or_na(f)) { has_header = true; break; }
    const std::size_t first_data = has_header ? 1 : 0;
    if (first_data >= rows.size()) throw DataError(std::string(origin) + ": no data rows");

    // Leading row-name column: every data row's first field non-numeric.
    bool has_row_names = width > 1;
    for (std::size_t i = first_data; i < rows.size() && has_row_names; ++i)
        if (numeric_or_na(rows[i][0])) has_row_names = false;
    const std::size_t first_col = has_row_names ? 1 : 0;

    const std::size_t n = rows.size() - first_data;
    const std::size_t d = width - first_col;
    if (d == 0) throw DataError(std::string(origin) + ": no data columns");

    DataMatrix out;
    out.values = Matrix(n, d);
    out.missing = BoolMat(n, d);
    out.col_names.resize(d);
    out.row_names.resize(n);

    if (has_header) {
        for (std::size_t j = 0; j < d; ++j)
            out.col_names[j] = std::string(rows[0][first_col + j]);
    } else {
        out.col_names = default_col_names(d);
    }
    for (std::size_t i = 0; i < n; ++i) {
        out.row_names[i] = has_row_names ? std::string(rows[first_data + i][0])
                                         : std::to_string(i + 1);
        for (std::size_t j = 0; j < d; ++j) {
            const std::string_view f = rows[first_data + i][first_col + j];
            if (is_na_token(f)) {
                out.missing.set(i, j, true);
                continue;
            }
            double v;
            if (!parse_double(f, v)) {
                std::ostringstream msg;
                msg << origin << ": cannot parse '" << f << "' at row " << (first_data + i + 1)
                    << ", column " << (first_col + j + 1);
                throw DataError(msg.str());
            }
            out.values(i, j) = v;
        }
    }
    return out;
}

DataMatrix read_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    return parse_csv(text, path);
}

std::string to_csv(const DataMatrix& m) {
    const bool named_rows = m.row_names != default_row_names(m.n());
    std::string out;
    if (named_rows) out += ",";
    for (std::size_t j = 0; j < m.d(); ++j) {
        if (j) out += ",";
        out += m.col_names[j];
    }
    out += "\n";
    for (std::size_t i = 0; i < m.n(); ++i) {
        if (named_rows) {
            out += m.row_names[i];
            out += ",";
        }
        for (std::size_t j = 0; j < m.d(); ++j) {
            if (j) out += ",";
            out += m.is_missing(i, j) ? "NA" : format_double(m.values(i, j));
        }
        out += "\n";
    }
    return out;
}

void write_csv(const DataMatrix& m, const std::string& path) {
    write_text_atomic(path, to_csv(m));
}

}  // namespace cellrobust
