#include "selab/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>
#include <unordered_set>

namespace selab {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = nl + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

std::string row_error(std::size_t row, const std::string& what) {
    return "row " + std::to_string(row) + ": " + what;
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
    return v;
}

std::optional<int> parse_binary(std::string_view s) {
    if (s == "0") return 0;
    if (s == "1") return 1;
    return std::nullopt;
}

}  // namespace

const char* to_string(Provenance p) noexcept {
    return p == Provenance::observed ? "observed" : "augmented";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "observed") return Provenance::observed;
    if (s == "augmented") return Provenance::augmented;
    throw DataError("unknown provenance '" + s + "'");
}

std::vector<std::string> default_feature_names(Eigen::Index k) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j) names.push_back("f" + std::to_string(j));
    return names;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    if (ec != std::errc{}) throw InvariantError("format_double: buffer too small");
    return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
    double v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || s.empty())
        throw DataError("not a number: '" + std::string(s) + "'");
    return v;
}

void validate(const Dataset& ds) {
    if (ds.feature_names.empty()) throw DataError("dataset must have at least one feature");
    std::unordered_set<std::uint64_t> seen;
    for (std::size_t i = 0; i < ds.instances.size(); ++i) {
        const auto& inst = ds.instances[i];
        const auto row = i + 1;
        if (inst.x.size() != ds.dim())
            throw DataError(row_error(row, "feature dimension " + std::to_string(inst.x.size()) +
                                               " != " + std::to_string(ds.dim())));
        if (!inst.x.allFinite()) throw DataError(row_error(row, "non-finite feature"));
        if (inst.decision != 0 && inst.decision != 1)
            throw DataError(row_error(row, "decision must be 0 or 1"));
        if (inst.decision == 0 && inst.outcome)
            throw DataError(row_error(row, "outcome present but d=0"));
        if (inst.decision == 1 && !inst.outcome)
            throw DataError(row_error(row, "outcome missing but d=1"));
        if (inst.outcome && *inst.outcome != 0 && *inst.outcome != 1)
            throw DataError(row_error(row, "outcome must be 0 or 1"));
        if (!seen.insert(inst.id).second)
            throw DataError(row_error(row, "duplicate id " + std::to_string(inst.id)));
    }
}

std::string to_csv(const Dataset& ds) {
    std::string out = "id";
    for (const auto& name : ds.feature_names) out += "," + name;
    out += ",d,y\n";
    for (const auto& inst : ds.instances) {
        out += std::to_string(inst.id);
        for (Eigen::Index j = 0; j < inst.x.size(); ++j) out += "," + format_double(inst.x[j]);
        out += inst.decision ? ",1," : ",0,";
        if (inst.outcome) out += std::to_string(*inst.outcome);
        out += '\n';
    }
    return out;
}

Dataset parse_dataset_csv(const std::string& text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw DataError("missing header");

    const auto header = split_fields(lines[0]);
    if (header.size() < 4 || header.front() != "id" || header[header.size() - 2] != "d" ||
        header.back() != "y")
        throw DataError("header must be id,<features...>,d,y");

    Dataset ds;
    for (std::size_t j = 1; j + 2 < header.size(); ++j) ds.feature_names.emplace_back(header[j]);
    const auto k = static_cast<Eigen::Index>(ds.feature_names.size());

    std::unordered_set<std::uint64_t> seen;
    ds.instances.reserve(lines.size() - 1);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split_fields(lines[r]);
        if (fields.size() != header.size())
            throw DataError(row_error(r, "expected " + std::to_string(header.size()) +
                                             " columns, got " + std::to_string(fields.size())));
        Instance inst;
        const auto id = parse_u64(fields[0]);
        if (!id) throw DataError(row_error(r, "invalid id '" + std::string(fields[0]) + "'"));
        inst.id = *id;
        inst.x.resize(k);
        for (Eigen::Index j = 0; j < k; ++j) {
            try {
                inst.x[j] = parse_double(fields[static_cast<std::size_t>(j) + 1]);
            } catch (const DataError& e) {
                throw DataError(row_error(r, e.what()));
            }
            if (!std::isfinite(inst.x[j])) throw DataError(row_error(r, "non-finite feature"));
        }
        const auto d = parse_binary(fields[fields.size() - 2]);
        if (!d) throw DataError(row_error(r, "decision must be 0 or 1"));
        inst.decision = *d;
        const auto y_text = fields.back();
        if (!y_text.empty()) {
            const auto y = parse_binary(y_text);
            if (!y) throw DataError(row_error(r, "outcome must be 0, 1 or empty"));
            if (inst.decision == 0) throw DataError(row_error(r, "outcome present but d=0"));
            inst.outcome = *y;
        } else if (inst.decision == 1) {
            throw DataError(row_error(r, "outcome missing but d=1"));
        }
        if (!seen.insert(inst.id).second)
            throw DataError(row_error(r, "duplicate id " + std::to_string(inst.id)));
        ds.instances.push_back(std::move(inst));
    }
    return ds;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw DataError("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
    try {
        return parse_dataset_csv(read_text_file(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    write_text_file(path, to_csv(ds));
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0,1), got " + format_double(train_fraction));
    if (ds.empty()) throw DataError("cannot split an empty dataset");

    const std::size_t n = ds.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
    }
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));

    std::pair<Dataset, Dataset> parts{Dataset{{}, ds.feature_names}, Dataset{{}, ds.feature_names}};
    parts.first.instances.reserve(n_train);
    parts.second.instances.reserve(n - n_train);
    for (std::size_t i = 0; i < n; ++i)
        (i < n_train ? parts.first : parts.second).instances.push_back(ds.instances[order[i]]);
    return parts;
}

std::vector<LabeledExample> observed_subset(const Dataset& ds) {
    std::vector<LabeledExample> out;
    for (const auto& inst : ds.instances) {
        if (inst.decision != 1) continue;
        if (!inst.outcome) throw InvariantError("observed instance without outcome");
        out.push_back({inst.id, inst.x, *inst.outcome, 1.0, Provenance::observed});
    }
    return out;
}

void save_prob_map(const ProbMap& probs, const std::filesystem::path& path) {
    std::string out = "id,prob\n";
    for (const auto& [id, p] : probs) out += std::to_string(id) + "," + format_double(p) + "\n";
    write_text_file(path, out);
}

ProbMap load_prob_map(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "id,prob")
        throw DataError(path.string() + ": header must be id,prob");
    ProbMap probs;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split_fields(lines[r]);
        if (fields.size() != 2) throw DataError(row_error(r, "expected 2 columns"));
        const auto id = parse_u64(fields[0]);
        if (!id) throw DataError(row_error(r, "invalid id"));
        const double p = parse_double(fields[1]);
        if (!(p >= 0.0 && p <= 1.0)) throw DataError(row_error(r, "probability outside [0,1]"));
        if (!probs.emplace(*id, p).second) throw DataError(row_error(r, "duplicate id"));
    }
    return probs;
}

}  // namespace selab
