#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "matchals/io.hpp"
#include "test_util.hpp"

using namespace matchals;
namespace fs = std::filesystem;

namespace {

template <typename F>
long parse_error_line(F&& fn) {
    try {
        fn();
    } catch (const ParseError& e) {
        return e.line();
    }
    return -1;
}

AffinityInput sample_input() {
    auto in = AffinityInput::zeros(FeatureIndexMap::from_counts({2, 2}));
    in.set_observed(0, 1, true);
    in.scores(0, 2) = in.scores(2, 0) = 1.0 / 3.0;
    in.scores(1,  3) = in.scores(3, 1) = 0.25;
    in.scores(0, 3) = in.scores(3, 0) = 1.0;
    return in;
}

}  // namespace

TEST_CASE("affinity files round-trip bitwise") {
    testutil::TempDir dir;
    const fs::path first = dir.file("a.txt");
    const fs::path second = dir.file("b.txt");
    const AffinityInput in = sample_input();

    save_affinity(first, in);
    const AffinityFile loaded = load_affinity_file(first);
    CHECK_FALSE(loaded.simulated);
    CHECK(loaded.input.is_observed(0, 1));
    CHECK_FALSE(loaded.input.is_observed(0, 0));
    CHECK((loaded.input.scores - in.scores).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.input.scores(0, 2) == 1.0 / 3.0);

    save_affinity(second, loaded.input);
    CHECK(testutil::read_file(first) == testutil::read_file(second));
}

TEST_CASE("the simulated marker survives a round trip") {
    testutil::TempDir dir;
    const fs::path path = dir.file("sim.txt");
    save_affinity(path, sample_input(), true);
    CHECK(load_affinity_file(path).simulated);
}

TEST_CASE("carriage returns, comments, and blank lines are tolerated") {
    testutil::TempDir dir;
    const fs::path path = dir.file("messy.txt");
    testutil::write_file(path,
                         "#images 2\r\n"
                         "\r\n"
                         "#features 1 1\r\n"
                         "# free-form comment\r\n"
                         "#source simulated\r\n"
                         "   \r\n"
                         "1 1 2 1 0.5\r\n");
    const AffinityFile f = load_affinity_file(path);
    CHECK(f.simulated);
    CHECK(f.input.scores(0, 1) == 0.5);
    CHECK(f.input.scores(1, 0) == 0.5);
    CHECK(f.input.is_observed(0, 1));
}

TEST_CASE("a header-only affinity file is an empty observed set") {
    testutil::TempDir dir;
    const fs::path path = dir.file("empty.txt");
    testutil::write_file(path, "#images 2\n#features 2 3\n");
    const AffinityInput in = load_affinity(path);
    CHECK(in.index.total() == 5);
    CHECK((in.scores.array() == 0.0).all());
    CHECK_FALSE(in.is_observed(0, 1));
}

TEST_CASE("affinity parse errors carry one-based line numbers") {
    testutil::TempDir dir;
    const fs::path path = dir.file("bad.txt");
    const auto line_of = [&](const std::string& content) {
        testutil::write_file(path, content);
        return parse_error_line([&] { load_affinity(path); });
    };

    CHECK(line_of("") == 1);
    CHECK(line_of("#image 2\n#features 1 1\n") == 1);
    CHECK(line_of("#images 0\n#features\n") == 1);
    CHECK(line_of("#images two\n#features 1 1\n") == 1);
    CHECK(line_of("#images 2\n#features 1\n") == 2);
    CHECK(line_of("#images 2\n#features 1 0\n") == 2);
    CHECK(line_of("#images 2\n#features 1 1\n1 1 2 1\n") == 3);
    CHECK(line_of("#images 2\n#features 1 1\n1 1 2 1 0\n") == 3);
    CHECK(line_of("#images 2\n#features 1 1\n1 1 2 1 1.5\n") == 3);
    CHECK(line_of("#images 2\n#features 1 1\n1 1 2 1 nan\n") == 3);
    CHECK(line_of("#images 2\n#features 1 1\n1 1 1 1 0.5\n") == 3);
    CHECK(line_of("#images 2\n#features 1 1\n1 1 3 1 0.5\n") == 3);
    CHECK(line_of("#images 2\n#features 1 1\n1 2 2 1 0.5\n") == 3);
    CHECK(line_of("#images 2\n#features 1 1\n1 0 2 1 0.5\n") == 3);
    CHECK(line_of("#images 2\n#features 1 1\n# skip\n1 x 2 1 0.5\n") == 4);
}

TEST_CASE("duplicate entries are averaged across both orientations") {
    testutil::TempDir dir;
    const fs::path path = dir.file("dup.txt");
    testutil::write_file(path,
                         "#images 2\n#features 1 1\n"
                         "1 1 2 1 0.4\n"
                         "2 1 1 1 0.6\n");
    const AffinityInput in = load_affinity(path);
    CHECK(in.scores(0, 1) == 0.5);
    CHECK(in.scores(1, 0) == 0.5);

    testutil::write_file(path,
                         "#images 2\n#features 1 1\n"
                         "1 1 2 1 0.25\n"
                         "1 1 2 1 0.25\n");
    CHECK(load_affinity(path).scores(0, 1) == 0.25);
}

TEST_CASE("saving rejects scores outside the unit interval") {
    testutil::TempDir dir;
    auto in = AffinityInput::zeros(FeatureIndexMap::from_counts({1, 1}));
    in.set_all_observed();
    in.scores(0, 1) = in.scores(1, 0) = 1.5;
    CHECK_THROWS_AS(save_affinity(dir.file("x.txt"), in), std::invalid_argument);
    in.scores(0, 1) = in.scores(1, 0) = -0.2;
    CHECK_THROWS_AS(save_affinity(dir.file("x.txt"), in), std::invalid_argument);
}

TEST_CASE("writes are atomic and leave no temporary file") {
    testutil::TempDir dir;
    const fs::path path = dir.file("out.txt");
    atomic_write_text(path, "hello");
    CHECK(testutil::read_file(path) == "hello");
    CHECK_FALSE(fs::exists(dir.file("out.txt.tmp")));

    save_affinity(path, sample_input());
    CHECK_FALSE(fs::exists(dir.file("out.txt.tmp")));
}

TEST_CASE("match files round-trip and canonicalize") {
    testutil::TempDir dir;
    const fs::path first = dir.file("m1.txt");
    const fs::path second = dir.file("m2.txt");
    testutil::write_file(first,
                         "#images 3\n#features 2 2 1\n"
                         "2 2 1 1\n"
                         "# comment\n"
                         "1 2 3 1\n"
                         "1 2 3 1\n");
    const MatchesFile f = load_matches(first);
    REQUIRE(f.matches.size() == 2);
    Match a;
    a.image_i = 0;
    a.feature_a = 0;
    a.image_j = 1;
    a.feature_b = 1;
    Match b;
    b.image_i = 0;
    b.feature_a = 1;
    b.image_j = 2;
    b.feature_b = 0;
    CHECK(f.matches.matches[0] == a);
    CHECK(f.matches.matches[1] == b);

    save_matches(second, f.index, f.matches);
    const MatchesFile again = load_matches(second);
    CHECK(again.matches.matches == f.matches.matches);

    const fs::path third = dir.file("m3.txt");
    save_matches(third, again.index, again.matches);
    CHECK(testutil::read_file(second) == testutil::read_file(third));
}

TEST_CASE("match parse errors carry line numbers") {
    testutil::TempDir dir;
    const fs::path path = dir.file("bad.txt");
    testutil::write_file(path, "#images 2\n#features 1 1\n1 1 2 1 0.5\n");
    CHECK(parse_error_line([&] { load_matches(path); }) == 3);
}

TEST_CASE("descriptor files are normalized row by row") {
    testutil::TempDir dir;
    const fs::path path = dir.file("d.txt");
    testutil::write_file(path, "dim 2\n3 4\n0 2\n");
    const DescriptorSet set = load_descriptors(path, 5);
    CHECK(set.id == 5);
    CHECK(set.dim == 2);
    REQUIRE(set.size() == 2);
    CHECK(set.vectors(0, 0) == 0.6);
    CHECK(set.vectors(0, 1) == 0.8);
    CHECK(set.vectors(1, 0) == 0.0);
    CHECK(set.vectors(1, 1) == 1.0);
    CHECK_NOTHROW(set.validate());
}

TEST_CASE("descriptor parse errors are specific") {
    testutil::TempDir dir;
    const fs::path path = dir.file("d.txt");
    const auto line_of = [&](const std::string& content) {
        testutil::write_file(path, content);
        return parse_error_line([&] { load_descriptors(path, 0); });
    };
    CHECK(line_of("") == 1);
    CHECK(line_of("dims 2\n1 0\n") == 1);
    CHECK(line_of("dim 0\n1\n") == 1);
    CHECK(line_of("dim 2\n") == 1);
    CHECK(line_of("dim 2\n1 0 0\n") == 2);
    CHECK(line_of("dim 2\n0 0\n") == 2);
    CHECK(line_of("dim 2\n1 zero\n") == 2);
}

TEST_CASE("descriptor directories load in filename order") {
    testutil::TempDir dir;
    testutil::write_file(dir.file("b.txt"), "dim 2\n0 1\n");
    testutil::write_file(dir.file("a.txt"), "dim 2\n1 0\n");
    const std::vector<DescriptorSet> sets = load_descriptor_dir(dir.path);
    REQUIRE(sets.size() == 2);
    CHECK(sets[0].id == 0);
    CHECK(sets[0].vectors(0, 0) == 1.0);
    CHECK(sets[1].id == 1);
    CHECK(sets[1].vectors(0, 1) == 1.0);
}

TEST_CASE("a directory with fewer than two files is an empty problem") {
    testutil::TempDir dir;
    testutil::write_file(dir.file("only.txt"), "dim 1\n1\n");
    CHECK_THROWS_AS(load_descriptor_dir(dir.path), EmptyProblemError);
}

TEST_CASE("sweep csv output has the exact header and round-trips values") {
    testutil::TempDir dir;
    const fs::path path = dir.file("sweep.csv");
    SweepCellResult cell;
    cell.axis1_value = 20.0;
    cell.axis2_value = 0.2;
    cell.solver = "matchals";
    cell.repeats = 5;
    cell.mean_error = 1.0 / 3.0;
    cell.std_error = 0.01;
    cell.mean_input_error = 0.2;
    cell.mean_iterations = 131.8;
    cell.mean_seconds = 0.25;
    save_sweep_csv(path, {cell});

    const std::string text = testutil::read_file(path);
    const std::string header =
        "axis1,axis2,solver,repeats,mean_error,std_error,mean_input_error,mean_iters,"
        "mean_seconds\n";
    REQUIRE(text.size() > header.size());
    CHECK(text.substr(0, header.size()) == header);

    const std::string row = text.substr(header.size());
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : row) {
        if (ch == ',' || ch == '\n') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    REQUIRE(fields.size() == 9);
    CHECK(std::strtod(fields[4].c_str(), nullptr) == 1.0 / 3.0);
    CHECK(std::strtod(fields[8].c_str(), nullptr) == 0.25);
    CHECK(fields[2] == "matchals");
    CHECK(fields[3] == "5");
}
