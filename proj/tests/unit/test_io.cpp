#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gknet/errors.hpp"
#include "gknet/io.hpp"
#include "helpers.hpp"

using namespace gknet;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "gknet_unit" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("datasets load from paired tables") {
    std::istringstream a("A,B\n1,2\n3,4\n"), b("A,B\n0.5,1\n1,1\n");
    const auto d = load_dataset(a, b);
    CHECK(d.species_names == std::vector<std::string>{"A", "B"});
    CHECK(d.phospho(1, 0) == 3.0);
    CHECK(d.unphospho(0, 0) == 0.5);
    CHECK(d.total(1, 1) == 5.0);
}

TEST_CASE("malformed tables name the problem") {
    auto fails_with = [](const std::string& x, const std::string& x0, const std::string& needle) {
        std::istringstream a(x), b(x0);
        try {
            load_dataset(a, b);
        } catch (const ParseError& e) {
            return std::string(e.what()).find(needle) != std::string::npos;
        }
        return false;
    };
    CHECK(fails_with("A,B\n1,2\n", "A,C\n1,2\n", "column 2"));
    CHECK(fails_with("A,B\n1,2\n3,4\n", "A,B\n1,2\n", "row count"));
    CHECK(fails_with("A,B\n1,x\n", "A,B\n1,2\n", "row 1, column 2 (B)"));
    CHECK(fails_with("A,B\n1,-2\n", "A,B\n1,2\n", "negative"));
    CHECK(fails_with("A,B\n1\n", "A,B\n1,2\n", "line 2"));
    CHECK(fails_with("", "A,B\n1,2\n", "empty"));
}

TEST_CASE("unit-mean normalisation") {
    auto d = testing::make_dataset({{1, 0}, {3, 4}}, {{2, 2}, {2, 6}});
    testing::WarningCapture w;
    const auto n = normalize_unit_mean(d);
    CHECK(n.normalized);
    CHECK(n.phospho(0, 0) == 0.5);
    CHECK(n.phospho(1, 0) == 1.5);
    CHECK(n.phospho(0, 1) == 1e-6);
    CHECK(n.unphospho(1, 1) == 1.5);
    CHECK(w.messages.size() == 1);
    auto zero = testing::make_dataset({{0, 1}, {0, 1}}, {{1, 1}, {1, 1}});
    CHECK_THROWS_AS(normalize_unit_mean(zero), InvalidInput);
}

TEST_CASE("numbers round-trip exactly") {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, 12345.678901234567, 0.0}) {
        CHECK(std::stod(format_number(x)) == x);
    }
}

TEST_CASE("edge files round-trip with NA and empty role columns") {
    const auto dir = scratch("edges");
    const std::vector<EdgeRecord> edges{{"A", "B", 0.25, 0.2, 0.05, "gk"}, {"A", "C", std::nullopt, std::nullopt, std::nullopt, "lasso"}};
    std::ostringstream out;
    write_edges(out, edges);
    CHECK(out.str() == "child,candidate,weight,role_kinase_prob,role_inhibitor_prob,method\n"
                       "A,B,0.25,0.2,0.05,gk\nA,C,NA,,,lasso\n");
    write_text(dir / "sub" / "e.csv", out.str());
    const auto back = read_edges(dir / "sub" / "e.csv");
    REQUIRE(back.size() == 2);
    CHECK(*back[0].weight == 0.25);
    CHECK_FALSE(back[1].weight);
    CHECK_FALSE(back[1].kinase_prob);
    CHECK(back[1].method == "lasso");
}

TEST_CASE("truth files") {
    const auto dir = scratch("truth");
    write_text(dir / "t.csv", "child,parent,role\nA,B,kinase\nA,C,inhibitor\n");
    const auto t = read_truth(dir / "t.csv", {"A", "B", "C"});
    REQUIRE(t.size() == 2);
    CHECK(t[1].role == EdgeRole::inhibitor);
    CHECK(t[0].parent == 1);
    write_text(dir / "bad.csv", "child,parent,role\nA,B,activator\n");
    CHECK_THROWS_AS(read_truth(dir / "bad.csv", {"A", "B"}), ParseError);
    write_text(dir / "unknown.csv", "child,parent,role\nA,Z,kinase\n");
    CHECK_THROWS_AS(read_truth(dir / "unknown.csv", {"A", "B"}), ParseError);
}
