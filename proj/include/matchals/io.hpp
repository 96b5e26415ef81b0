#pragma once

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "matchals/errors.hpp"
#include "matchals/index_map.hpp"
#include "matchals/metrics.hpp"
#include "matchals/pairwise.hpp"
#include "matchals/synth.hpp"
#include "matchals/types.hpp"

namespace matchals {

namespace detail {

inline std::vector<std::string> split_tokens(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

inline long parse_long(const std::string& tok, long line) {
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (errno != 0 || end == tok.c_str() || *end != '\0') {
        throw ParseError("expected an integer, got '" + tok + "'", line);
    }
    return v;
}

inline double parse_real(const std::string& tok, long line) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (errno != 0 || end == tok.c_str() || *end != '\0' || !std::isfinite(v)) {
        throw ParseError("expected a finite real, got '" + tok + "'", line);
    }
    return v;
}

/// Shortest decimal form that round-trips the exact double value.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Reads non-empty lines, strips trailing carriage returns, and reports the
/// 1-based line number of each.
inline std::vector<std::pair<long, std::string>> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::vector<std::pair<long, std::string>> lines;
    std::string line;
    long number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        lines.emplace_back(number, line);
    }
    return lines;
}

/// Parses the two shared header lines (`#images n`, `#features p_1 ...`)
/// and returns the index map plus the count of consumed lines.
inline std::pair<FeatureIndexMap, std::size_t> parse_header(
    const std::vector<std::pair<long, std::string>>& lines) {
    if (lines.size() < 2) {
        throw ParseError("missing header",
                         lines.empty() ? 1 : lines.back().first);
    }
    const auto head = split_tokens(lines[0].second);
    if (head.size() != 2 || head[0] != "#images") {
        throw ParseError("expected '#images <n>'", lines[0].first);
    }
    const long n = parse_long(head[1], lines[0].first);
    if (n < 1) {
        throw ParseError("image count must be positive", lines[0].first);
    }
    const auto feats = split_tokens(lines[1].second);
    if (feats.empty() || feats[0] != "#features") {
        throw ParseError("expected '#features p_1 ... p_n'", lines[1].first);
    }
    if (static_cast<long>(feats.size()) != n + 1) {
        throw ParseError("feature count list does not match image count", lines[1].first);
    }
    std::vector<int> counts;
    for (long i = 1; i <= n; ++i) {
        const long p = parse_long(feats[i], lines[1].first);
        if (p < 1) {
            throw ParseError("every image needs at least one feature", lines[1].first);
        }
        counts.push_back(static_cast<int>(p));
    }
    return {FeatureIndexMap::from_counts(std::move(counts)), 2};
}

struct EntryIndices {
    int image_i, feature_a, image_j, feature_b;  // 0-based
};

inline EntryIndices parse_entry_indices(const std::vector<std::string>& toks,
                                        const FeatureIndexMap& index, long line) {
    const long i = parse_long(toks[0], line);
    const long a = parse_long(toks[1], line);
    const long j = parse_long(toks[2], line);
    const long b = parse_long(toks[3], line);
    if (i < 1 || i > index.images() || j < 1 || j > index.images()) {
        throw ParseError("image index out of range", line);
    }
    if (i == j) {
        throw ParseError("entries must connect two different images", line);
    }
    if (a < 1 || a > index.features(static_cast<int>(i) - 1) || b < 1 ||
        b > index.features(static_cast<int>(j) - 1)) {
        throw ParseError("feature index out of range", line);
    }
    return {static_cast<int>(i) - 1, static_cast<int>(a) - 1, static_cast<int>(j) - 1,
            static_cast<int>(b) - 1};
}

}  // namespace detail

/// Writes content to a temporary file beside the target, then renames it
/// into place, so a killed process never leaves a truncated file.
inline void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        }
        out << content;
        out.flush();
        if (!out) {
            throw std::runtime_error("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

struct AffinityFile {
    AffinityInput input;
    bool simulated = false;  // set when the file carries a `#source simulated` line
};

inline AffinityFile load_affinity_file(const std::filesystem::path& path) {
    const auto lines = detail::read_lines(path);
    auto [index, consumed] = detail::parse_header(lines);
    AffinityFile file;
    file.input = AffinityInput::zeros(index);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(index.total(), index.total());
    Eigen::MatrixXi count = Eigen::MatrixXi::Zero(index.total(), index.total());
    bool conflict = false;
    for (std::size_t li = consumed; li < lines.size(); ++li) {
        const auto& [number, text] = lines[li];
        const auto toks = detail::split_tokens(text);
        if (toks[0] == "#source") {
            if (toks.size() >= 2 && toks[1] == "simulated") file.simulated = true;
            continue;
        }
        if (toks[0][0] == '#') continue;
        if (toks.size() != 5) {
            throw ParseError("expected 'i a j b score'", number);
        }
        const auto e = detail::parse_entry_indices(toks, index, number);
        const double score = detail::parse_real(toks[4], number);
        if (!(score > 0.0 && score <= 1.0)) {
            throw ParseError("score must be in (0, 1]", number);
        }
        const int g = index.global_index(e.image_i, e.feature_a);
        const int h = index.global_index(e.image_j, e.feature_b);
        for (const auto& [r, c] : {std::pair{g, h}, std::pair{h, g}}) {
            if (count(r, c) > 0 && std::abs(score - sum(r, c) / count(r, c)) > 1e-9) {
                conflict = true;
            }
            sum(r, c) += score;
            count(r, c) += 1;
        }
        file.input.set_observed(e.image_i, e.image_j, true);
    }
    if (conflict) {
        std::cerr << "warning: " << path.string()
                  << ": conflicting duplicate scores were averaged\n";
    }
    for (int r = 0; r < index.total(); ++r) {
        for (int c = 0; c < index.total(); ++c) {
            if (count(r, c) > 0) file.input.scores(r, c) = sum(r, c) / count(r, c);
        }
    }
    file.input.validate();
    return file;
}

inline AffinityInput load_affinity(const std::filesystem::path& path) {
    return load_affinity_file(path).input;
}

namespace detail {

inline std::string header_text(const FeatureIndexMap& index) {
    std::string out = "#images " + std::to_string(index.images()) + "\n#features";
    for (int i = 0; i < index.images(); ++i) {
        out += " " + std::to_string(index.features(i));
    }
    out += "\n";
    return out;
}

}  // namespace detail

/// Writes the canonical upper-triangle entries (i < j, block row-major),
/// one `i a j b score` line per nonzero score, 1-based.
inline void save_affinity(const std::filesystem::path& path, const AffinityInput& input,
                          bool simulated = false) {
    input.validate();
    const auto& index = input.index;
    if (input.scores.minCoeff() < 0.0 || input.scores.maxCoeff() > 1.0) {
        throw std::invalid_argument("affinity scores outside [0, 1] cannot be saved");
    }
    std::string out = detail::header_text(index);
    if (simulated) out += "#source simulated\n";
    for (int i = 0; i < index.images(); ++i) {
        for (int j = i + 1; j < index.images(); ++j) {
            const auto block = get_block(input.scores, index, i, j);
            for (int a = 0; a < block.rows(); ++a) {
                for (int b = 0; b < block.cols(); ++b) {
                    if (block(a, b) != 0.0) {
                        out += std::to_string(i + 1) + " " + std::to_string(a + 1) + " " +
                               std::to_string(j + 1) + " " + std::to_string(b + 1) + " " +
                               detail::format_double(block(a, b)) + "\n";
                    }
                }
            }
        }
    }
    atomic_write_text(path, out);
}

struct MatchesFile {
    FeatureIndexMap index;
    MatchSet matches;
};

inline MatchesFile load_matches(const std::filesystem::path& path) {
    const auto lines = detail::read_lines(path);
    auto [index, consumed] = detail::parse_header(lines);
    MatchesFile file;
    file.index = index;
    for (std::size_t li = consumed; li < lines.size(); ++li) {
        const auto& [number, text] = lines[li];
        const auto toks = detail::split_tokens(text);
        if (toks[0][0] == '#') continue;
        if (toks.size() != 4) {
            throw ParseError("expected 'i a j b'", number);
        }
        const auto e = detail::parse_entry_indices(toks, index, number);
        file.matches.matches.push_back({e.image_i, e.feature_a, e.image_j, e.feature_b});
    }
    file.matches.canonicalize();
    return file;
}

inline void save_matches(const std::filesystem::path& path, const FeatureIndexMap& index,
                         const MatchSet& matches) {
    std::string out = detail::header_text(index);
    for (const auto& m : matches.matches) {
        out += std::to_string(m.image_i + 1) + " " + std::to_string(m.feature_a + 1) + " " +
               std::to_string(m.image_j + 1) + " " + std::to_string(m.feature_b + 1) + "\n";
    }
    atomic_write_text(path, out);
}

/// Reads one image's descriptors: `dim <d>` then one row of d reals per
/// feature. Rows are normalized to unit length; deviations beyond 1e-6 are
/// reported once per file.
inline DescriptorSet load_descriptors(const std::filesystem::path& path, int id) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) {
        throw ParseError("missing 'dim <d>' header", 1);
    }
    const auto head = detail::split_tokens(lines[0].second);
    if (head.size() != 2 || head[0] != "dim") {
        throw ParseError("expected 'dim <d>'", lines[0].first);
    }
    const long d = detail::parse_long(head[1], lines[0].first);
    if (d < 1) {
        throw ParseError("descriptor dimension must be positive", lines[0].first);
    }
    if (lines.size() < 2) {
        throw ParseError("descriptor file has no vectors", lines[0].first);
    }
    DescriptorSet set;
    set.id = id;
    set.dim = static_cast<int>(d);
    set.vectors.resize(static_cast<int>(lines.size()) - 1, set.dim);
    long off_norm = 0;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto& [number, text] = lines[li];
        const auto toks = detail::split_tokens(text);
        if (static_cast<long>(toks.size()) != d) {
            throw ParseError("expected " + std::to_string(d) + " values", number);
        }
        for (long c = 0; c < d; ++c) {
            set.vectors(static_cast<int>(li) - 1, c) = detail::parse_real(toks[c], number);
        }
        const double norm = set.vectors.row(static_cast<int>(li) - 1).norm();
        if (norm == 0.0) {
            throw ParseError("zero vector cannot be normalized", number);
        }
        if (std::abs(norm - 1.0) > 1e-6) ++off_norm;
        set.vectors.row(static_cast<int>(li) - 1) /= norm;
    }
    if (off_norm > 0) {
        std::cerr << "warning: " << path.string() << ": " << off_norm
                  << " descriptor(s) were not unit length and were normalized\n";
    }
    return set;
}

/// Loads every regular file in the directory as one image's descriptors,
/// in lexicographic filename order.
inline std::vector<DescriptorSet> load_descriptor_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.size() < 2) {
        throw EmptyProblemError("descriptor directory must hold at least two files");
    }
    std::vector<DescriptorSet> sets;
    for (std::size_t i = 0; i < files.size(); ++i) {
        sets.push_back(load_descriptors(files[i], static_cast<int>(i)));
    }
    return sets;
}

inline void save_sweep_csv(const std::filesystem::path& path,
                           const std::vector<SweepCellResult>& results) {
    std::string out =
        "axis1,axis2,solver,repeats,mean_error,std_error,mean_input_error,mean_iters,"
        "mean_seconds\n";
    for (const auto& r : results) {
        out += detail::format_double(r.axis1_value) + "," + detail::format_double(r.axis2_value) +
               "," + r.solver + "," + std::to_string(r.repeats) + "," +
               detail::format_double(r.mean_error) + "," + detail::format_double(r.std_error) +
               "," + detail::format_double(r.mean_input_error) + "," +
               detail::format_double(r.mean_iterations) + "," +
               detail::format_double(r.mean_seconds) + "\n";
    }
    atomic_write_text(path, out);
}

}  // namespace matchals
