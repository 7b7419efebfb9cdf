#pragma once

// Matrix and label files, canonical JSON output and synthetic-spec parsing.
//
// Matrix formats:
//   csv      one sample per line, comma-separated, optional non-numeric header
//            line; written with 17 significant digits.
//   raw-f64  "IKMX" | version u32 | N u64 | d u64 | N*d f64, all little-endian,
//            row-major.
// File-level errors report 1-based line and column numbers.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "isokit/binary.hpp"
#include "isokit/linalg.hpp"
#include "isokit/synthgen.hpp"

namespace isokit {

enum class MatrixFormat { csv, raw_f64 };

inline constexpr std::string_view kMatrixMagic = "IKMX";
inline constexpr std::uint32_t kMatrixVersion = 1;

inline MatrixFormat format_for_path(const std::string& path) {
    const auto dot = path.rfind('.');
    if (dot != std::string::npos) {
        std::string ext = path.substr(dot + 1);
        for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (ext == "csv" || ext == "txt") return MatrixFormat::csv;
    }
    return MatrixFormat::raw_f64;
}

inline std::optional<MatrixFormat> parse_format(std::string_view name) {
    if (name == "csv") return MatrixFormat::csv;
    if (name == "raw" || name == "raw-f64") return MatrixFormat::raw_f64;
    return std::nullopt;
}

/// Shortest-safe decimal form: %.17g round-trips every finite double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_number(std::string_view tok, double& out) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    if (tok.empty()) return false;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

inline void finish_write(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace detail

inline EmbeddingMatrix parse_csv_matrix(std::string_view text) {
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::size_t line_no = 0;
    bool first_content_line = true;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const std::string_view raw = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        const std::string_view line = detail::trim(raw);
        if (line.empty()) continue;
        const auto fields = detail::split(line, ',');
        std::vector<double> row(fields.size());
        bool numeric = true;
        std::size_t bad_col = 0;
        for (std::size_t j = 0; j < fields.size(); ++j) {
            if (!detail::parse_number(fields[j], row[j])) {
                numeric = false;
                bad_col = j;
                break;
            }
        }
        if (!numeric) {
            if (first_content_line) {  // header
                first_content_line = false;
                continue;
            }
            throw MalformedFileError("cannot parse \"" + std::string(fields[bad_col]) + "\" as a number", line_no,
                                     bad_col + 1);
        }
        first_content_line = false;
        if (cols == 0) cols = fields.size();
        if (fields.size() != cols) {
            throw DimensionMismatchError("expected " + std::to_string(cols) + " columns, found " +
                                             std::to_string(fields.size()),
                                         line_no);
        }
        for (std::size_t j = 0; j < cols; ++j) {
            if (!std::isfinite(row[j])) throw NonFiniteError(line_no, j + 1);
        }
        values.insert(values.end(), row.begin(), row.end());
        ++rows;
    }
    if (rows == 0) throw MalformedFileError("no data rows");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * cols + j];
    return EmbeddingMatrix(std::move(m));
}

inline EmbeddingMatrix read_raw_matrix(std::istream& in) {
    binary::expect_magic(in, kMatrixMagic);
    const std::uint32_t version = binary::read_u32(in, "format version");
    if (version != kMatrixVersion) throw MalformedFileError("unsupported matrix format version " + std::to_string(version));
    const std::uint64_t n = binary::read_u64(in, "row count");
    const std::uint64_t d = binary::read_u64(in, "column count");
    if (n == 0 || d == 0) throw MalformedFileError("matrix header declares an empty matrix");
    if (n > (1ULL << 32) || d > (1ULL << 20) || n * d > (1ULL << 34)) {
        throw MalformedFileError("matrix header declares implausible dimensions");
    }
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::uint64_t i = 0; i < n; ++i) {
        for (std::uint64_t j = 0; j < d; ++j) {
            const double v = binary::read_f64(in, "matrix payload");
            if (!std::isfinite(v)) throw NonFiniteError(i + 1, j + 1);
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) throw MalformedFileError("trailing bytes after matrix payload");
    return EmbeddingMatrix(std::move(m));
}

/// Load a matrix. Without an explicit format the "IKMX" magic selects raw-f64,
/// anything else is parsed as CSV.
inline EmbeddingMatrix load_matrix(const std::string& path, std::optional<MatrixFormat> format = std::nullopt) {
    const std::string bytes = detail::read_file(path);
    if (!format) {
        format = bytes.compare(0, kMatrixMagic.size(), kMatrixMagic) == 0 ? MatrixFormat::raw_f64 : MatrixFormat::csv;
    }
    if (*format == MatrixFormat::csv) return parse_csv_matrix(bytes);
    std::istringstream in(bytes);
    return read_raw_matrix(in);
}

inline void write_csv_matrix(std::ostream& out, const EmbeddingMatrix& h) {
    const Matrix& m = h.values();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

inline void write_raw_matrix(std::ostream& out, const EmbeddingMatrix& h) {
    const Matrix& m = h.values();
    binary::write_magic(out, kMatrixMagic);
    binary::write_u32(out, kMatrixVersion);
    binary::write_u64(out, static_cast<std::uint64_t>(m.rows()));
    binary::write_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) binary::write_f64(out, m(i, j));
}

inline void save_matrix(const EmbeddingMatrix& h, const std::string& path,
                        std::optional<MatrixFormat> format = std::nullopt) {
    auto out = detail::open_for_write(path);
    if (format.value_or(format_for_path(path)) == MatrixFormat::csv) {
        write_csv_matrix(out, h);
    } else {
        write_raw_matrix(out, h);
    }
    detail::finish_write(out, path);
}

/// One integer class id per line; an optional non-numeric header is skipped.
inline std::vector<int> load_labels(const std::string& path) {
    const std::string bytes = detail::read_file(path);
    std::string_view text = bytes;
    std::vector<int> labels;
    std::size_t line_no = 0;
    bool first = true;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const std::string_view line = detail::trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty()) continue;
        int v = 0;
        const auto res = std::from_chars(line.data(), line.data() + line.size(), v);
        if (res.ec != std::errc() || res.ptr != line.data() + line.size()) {
            if (first) {
                first = false;
                continue;
            }
            throw MalformedFileError("cannot parse \"" + std::string(line) + "\" as a class id", line_no, 1);
        }
        first = false;
        labels.push_back(v);
    }
    if (labels.empty()) throw MalformedFileError("no labels in " + path);
    return labels;
}

inline void save_labels(const std::vector<int>& labels, const std::string& path) {
    auto out = detail::open_for_write(path);
    for (int y : labels) out << y << '\n';
    detail::finish_write(out, path);
}

// ---------------------------------------------------------------------------
// Canonical JSON: sorted keys, two-space indent, doubles as %.17g.

namespace detail {

inline void dump_canonical(const nlohmann::json& j, std::string& out, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    switch (j.type()) {
    case nlohmann::json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {  // std::map keeps keys sorted
            if (!first) out += ",\n";
            first = false;
            out += inner + nlohmann::json(it.key()).dump() + ": ";
            dump_canonical(it.value(), out, indent + 1);
        }
        out += "\n" + pad + "}";
        return;
    }
    case nlohmann::json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        bool scalar = std::none_of(j.begin(), j.end(), [](const auto& e) { return e.is_structured(); });
        if (scalar) {
            out += "[";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ", ";
                dump_canonical(j[i], out, indent + 1);
            }
            out += "]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",\n";
            out += inner;
            dump_canonical(j[i], out, indent + 1);
        }
        out += "\n" + pad + "]";
        return;
    }
    case nlohmann::json::value_t::number_float: {
        const double v = j.get<double>();
        if (!std::isfinite(v)) throw ContractError("non-finite value in JSON output");
        out += format_double(v);
        return;
    }
    default:
        out += j.dump();
    }
}

}  // namespace detail

inline std::string to_canonical_json(const nlohmann::json& j) {
    std::string out;
    detail::dump_canonical(j, out, 0);
    out += '\n';
    return out;
}

inline void save_json(const nlohmann::json& j, const std::string& path) {
    auto out = detail::open_for_write(path);
    out << to_canonical_json(j);
    detail::finish_write(out, path);
}

inline nlohmann::json load_json(const std::string& path) {
    const std::string bytes = detail::read_file(path);
    try {
        return nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedFileError(std::string("invalid JSON in ") + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Synthetic spec JSON.
//
//   n_samples, dim, seed                   integers (required: n_samples, dim)
//   group_sizes [int], group_offset int, within_group_corr number
//   std_profile [number]  or  std_start number + std_decay number
//                         (std_j = std_start * std_decay^j)
//   label_axis [number]   or  label_dim int (one-hot axis), label_noise number

inline SyntheticSpec spec_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "n_samples", "dim", "seed", "group_sizes", "group_offset", "within_group_corr", "std_profile",
        "std_start", "std_decay", "label_axis", "label_dim", "label_noise"};
    if (!j.is_object()) throw DataError("invalid_spec", "spec must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw DataError("invalid_spec", "unknown spec key \"" + it.key() + "\"");
    }
    try {
        SyntheticSpec s;
        s.n_samples = j.at("n_samples").get<std::size_t>();
        s.dim = j.at("dim").get<std::size_t>();
        s.seed = j.value("seed", std::uint64_t{0});
        s.group_sizes = j.value("group_sizes", std::vector<std::size_t>{});
        s.group_offset = j.value("group_offset", std::size_t{0});
        s.within_group_corr = j.value("within_group_corr", 0.0);
        if (j.contains("std_profile") && (j.contains("std_start") || j.contains("std_decay"))) {
            throw DataError("invalid_spec", "give either std_profile or std_start/std_decay");
        }
        if (j.contains("std_profile")) {
            s.std_profile = j.at("std_profile").get<std::vector<double>>();
        } else if (j.contains("std_start") || j.contains("std_decay")) {
            const double start = j.value("std_start", 1.0);
            const double decay = j.value("std_decay", 1.0);
            s.std_profile.resize(s.dim);
            double v = start;
            for (std::size_t i = 0; i < s.dim; ++i, v *= decay) s.std_profile[i] = v;
        }
        if (j.contains("label_axis") && j.contains("label_dim")) {
            throw DataError("invalid_spec", "give either label_axis or label_dim");
        }
        if (j.contains("label_axis")) {
            s.label_axis = j.at("label_axis").get<std::vector<double>>();
        } else if (j.contains("label_dim")) {
            const auto k = j.at("label_dim").get<std::size_t>();
            if (k >= s.dim) throw DataError("invalid_spec", "label_dim out of range");
            s.label_axis = std::vector<double>(s.dim, 0.0);
            (*s.label_axis)[k] = 1.0;
        }
        s.label_noise = j.value("label_noise", 0.0);
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid_spec", std::string("malformed spec: ") + e.what());
    }
}

}  // namespace isokit
