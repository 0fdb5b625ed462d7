#include "gknet/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "gknet/errors.hpp"
#include "gknet/log.hpp"

namespace gknet {
namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    for (auto& c : cells) {
        const auto b = c.find_first_not_of(" \t");
        const auto e = c.find_last_not_of(" \t");
        c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
    }
    return cells;
}

std::optional<double> parse_double(const std::string& text) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
    return value;
}

std::optional<double> parse_optional(const std::string& text, const std::string& where) {
    if (text.empty() || text == "NA") return std::nullopt;
    auto v = parse_double(text);
    if (!v) throw ParseError(fmt::format("{}: non-numeric value '{}'", where, text));
    return v;
}

std::string optional_text(const std::optional<double>& v, const char* empty) {
    return v ? format_number(*v) : std::string(empty);
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(fmt::format("cannot open {}", path.string()));
    return in;
}

std::size_t column(const CsvTable& t, const std::string& name, const std::string& source) {
    for (std::size_t k = 0; k < t.header.size(); ++k) {
        if (t.header[k] == name) return k;
    }
    throw ParseError(fmt::format("{}: missing column '{}'", source, name));
}

}  // namespace

CsvTable read_csv(std::istream& in, const std::string& source) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split(line);
        if (!have_header) {
            table.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw ParseError(fmt::format("{}: line {} has {} cells, header has {}", source, line_no, cells.size(),
                                         table.header.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    if (!have_header) throw ParseError(fmt::format("{}: empty file", source));
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_csv(in, path.string());
}

Eigen::MatrixXd parse_matrix(const CsvTable& table, const std::string& source) {
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    const auto p = static_cast<Eigen::Index>(table.header.size());
    Eigen::MatrixXd m(n, p);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < p; ++c) {
            const auto& cell = table.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            const auto v = parse_double(cell);
            const std::string where = fmt::format("{}: row {}, column {} ({})", source, r + 1, c + 1,
                                                  table.header[static_cast<std::size_t>(c)]);
            if (!v || !std::isfinite(*v)) throw ParseError(fmt::format("{}: non-numeric value '{}'", where, cell));
            if (*v < 0.0) throw ParseError(fmt::format("{}: negative value {}", where, cell));
            m(r, c) = *v;
        }
    }
    return m;
}

Dataset load_dataset(std::istream& phospho, std::istream& unphospho) {
    const auto a = read_csv(phospho, "phospho");
    const auto b = read_csv(unphospho, "unphospho");
    for (std::size_t k = 0; k < std::max(a.header.size(), b.header.size()); ++k) {
        const std::string left = k < a.header.size() ? a.header[k] : "<none>";
        const std::string right = k < b.header.size() ? b.header[k] : "<none>";
        if (left != right) {
            throw ParseError(fmt::format("header mismatch at column {}: '{}' vs '{}'", k + 1, left, right));
        }
    }
    if (a.rows.size() != b.rows.size()) {
        throw ParseError(fmt::format("row count mismatch: {} vs {}", a.rows.size(), b.rows.size()));
    }
    if (a.header.size() < 2) throw ParseError("need at least two species");
    Dataset d;
    d.species_names = a.header;
    d.phospho = parse_matrix(a, "phospho");
    d.unphospho = parse_matrix(b, "unphospho");
    return d;
}

Dataset load_dataset(const std::filesystem::path& phospho, const std::filesystem::path& unphospho) {
    auto a = open_input(phospho);
    auto b = open_input(unphospho);
    return load_dataset(a, b);
}

Dataset normalize_unit_mean(const Dataset& data) {
    Dataset out = data;
    auto scale = [&](Eigen::MatrixXd& m, const char* channel) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double mean = m.col(c).mean();
            const std::string& name = data.species_names[static_cast<std::size_t>(c)];
            if (!(mean > 0.0)) throw InvalidInput(fmt::format("{} column {} has zero mean", channel, name));
            m.col(c) /= mean;
            std::size_t zeros = 0;
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                if (m(r, c) == 0.0) {
                    m(r, c) = 1e-6;
                    ++zeros;
                }
            }
            if (zeros) warn(fmt::format("{} zero {} value(s) of {} clamped to 1e-6 of the column mean", zeros, channel, name));
        }
    };
    scale(out.phospho, "phospho");
    scale(out.unphospho, "unphospho");
    out.normalized = true;
    return out;
}

std::string format_number(double x) { return fmt::format("{}", x); }

void write_matrix(std::ostream& out, const std::vector<std::string>& names, const Eigen::MatrixXd& m) {
    for (std::size_t k = 0; k < names.size(); ++k) out << (k ? "," : "") << names[k];
    out << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_number(m(r, c));
        out << '\n';
    }
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
    std::ostringstream a, b;
    write_matrix(a, data.species_names, data.phospho);
    write_matrix(b, data.species_names, data.unphospho);
    write_text(dir / "phospho.csv", a.str());
    write_text(dir / "unphospho.csv", b.str());
}

void write_truth(std::ostream& out, const GroundTruthNetwork& net) {
    out << "child,parent,role\n";
    for (const auto& e : net.edges()) {
        out << net.names[e.child] << ',' << net.names[e.parent] << ',' << to_string(e.role) << '\n';
    }
}

std::vector<TruthEdge> read_truth(const std::filesystem::path& path, const std::vector<std::string>& names) {
    const auto t = read_csv(path);
    const std::string src = path.string();
    const auto ci = column(t, "child", src), pi = column(t, "parent", src), ri = column(t, "role", src);
    auto index = [&](const std::string& name, std::size_t row) {
        for (std::size_t k = 0; k < names.size(); ++k) {
            if (names[k] == name) return k;
        }
        throw ParseError(fmt::format("{}: row {}: unknown species '{}'", src, row + 1, name));
    };
    std::vector<TruthEdge> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        EdgeRole role;
        if (row[ri] == "kinase") {
            role = EdgeRole::kinase;
        } else if (row[ri] == "inhibitor") {
            role = EdgeRole::inhibitor;
        } else {
            throw ParseError(fmt::format("{}: row {}: unknown role '{}'", src, r + 1, row[ri]));
        }
        out.push_back({index(row[ci], r), index(row[pi], r), role});
    }
    return out;
}

void write_edges(std::ostream& out, const std::vector<EdgeRecord>& edges) {
    out << "child,candidate,weight,role_kinase_prob,role_inhibitor_prob,method\n";
    for (const auto& e : edges) {
        out << e.child << ',' << e.candidate << ',' << optional_text(e.weight, "NA") << ','
            << optional_text(e.kinase_prob, "") << ',' << optional_text(e.inhibitor_prob, "") << ',' << e.method
            << '\n';
    }
}

std::vector<EdgeRecord> read_edges(const std::filesystem::path& path) {
    const auto t = read_csv(path);
    const std::string src = path.string();
    const auto ci = column(t, "child", src), ki = column(t, "candidate", src), wi = column(t, "weight", src);
    const auto ai = column(t, "role_kinase_prob", src), ii = column(t, "role_inhibitor_prob", src);
    const auto mi = column(t, "method", src);
    std::vector<EdgeRecord> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = fmt::format("{}: row {}", src, r + 1);
        out.push_back({row[ci], row[ki], parse_optional(row[wi], where), parse_optional(row[ai], where),
                       parse_optional(row[ii], where), row[mi]});
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    out << text;
    if (!out) throw Error(fmt::format("failed writing {}", path.string()));
}

}  // namespace gknet
