#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gknet/kinetics.hpp"
#include "gknet/simulate.hpp"

namespace gknet {

/// Header plus string cells of a comma-separated file without quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Throws ParseError on a ragged row, naming the source and line.
CsvTable read_csv(std::istream& in, const std::string& source);
CsvTable read_csv(const std::filesystem::path& path);

/// Numeric matrix from a table whose header holds species names. Cells must
/// be finite and nonnegative; errors name row and column (1-based data row).
Eigen::MatrixXd parse_matrix(const CsvTable& table, const std::string& source);

/// Paired phospho/unphospho tables. Headers and row counts must agree.
Dataset load_dataset(std::istream& phospho, std::istream& unphospho);
Dataset load_dataset(const std::filesystem::path& phospho, const std::filesystem::path& unphospho);

/// Divides every phospho and unphospho column by its own mean, then clamps
/// zeros to 1e-6 (1e-6 of the raw column mean) with a warning. Throws
/// InvalidInput for a column with zero mean.
Dataset normalize_unit_mean(const Dataset& data);

/// Shortest round-trip text for a double.
std::string format_number(double x);

void write_matrix(std::ostream& out, const std::vector<std::string>& names, const Eigen::MatrixXd& m);
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
void write_truth(std::ostream& out, const GroundTruthNetwork& net);

/// Truth edges by species name, from a `child,parent,role` table.
std::vector<TruthEdge> read_truth(const std::filesystem::path& path, const std::vector<std::string>& names);

/// One row of an edge-weight file.
struct EdgeRecord {
    std::string child;
    std::string candidate;
    std::optional<double> weight;  // empty: NA
    std::optional<double> kinase_prob;
    std::optional<double> inhibitor_prob;
    std::string method;
};

void write_edges(std::ostream& out, const std::vector<EdgeRecord>& edges);
std::vector<EdgeRecord> read_edges(const std::filesystem::path& path);

/// Writes text to a file, creating parent directories; throws on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace gknet
