#ifndef EPM_EXPERIMENT_HPP
#define EPM_EXPERIMENT_HPP

// End-to-end experiment driver: collect -> split -> train -> evaluate -> report.
// Every stage seed is derived from the master seed and a task key, and every
// output carries (tool version, master seed, config hash).

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include <epm/benchmarks.hpp>
#include <epm/config_space.hpp>
#include <epm/de.hpp>
#include <epm/io.hpp>
#include <epm/parallel.hpp>
#include <epm/random.hpp>
#include <epm/report.hpp>
#include <epm/surrogates/surrogate.hpp>

namespace epm {

inline constexpr std::string_view tool_name = "epm-workbench";
inline constexpr std::string_view tool_version = "0.1.0";

struct ExperimentConfig {
    std::vector<ProblemId> problems{ProblemId::F1};
    std::vector<int> dimensions{2};
    int n_runs = 31;
    /// Fixed budget for every dimension; when unset, max_fes_per_dim * d.
    std::optional<long> max_fes;
    long max_fes_per_dim = 10000;
    GridStrides grid_strides;
    double train_fraction = 0.7;
    std::vector<Family> families{all_families.begin(), all_families.end()};
    int search_budget = 50;
    int cv_folds = 5;
    std::uint64_t master_seed = 1;
    std::string output_dir = "out";
    int workers = 1;
    TargetTransform target_transform = TargetTransform::raw;
    std::uint64_t suite_seed = default_suite_seed;

    long budget_for(int d) const { return max_fes ? *max_fes : max_fes_per_dim * d; }
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a stage needs output of an earlier stage that is absent or stale.
class MissingArtifact : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void validate(const ExperimentConfig& c)
{
    if (c.problems.empty())
        throw ConfigError("config: problems must not be empty");
    if (c.dimensions.empty())
        throw ConfigError("config: dimensions must not be empty");
    for (int d : c.dimensions)
        if (d < 2)
            throw ConfigError("config: every dimension must be at least 2, got " + std::to_string(d));
    if (std::set<ProblemId>(c.problems.begin(), c.problems.end()).size() != c.problems.size())
        throw ConfigError("config: duplicate problem id");
    if (std::set<int>(c.dimensions.begin(), c.dimensions.end()).size() != c.dimensions.size())
        throw ConfigError("config: duplicate dimension");
    if (c.n_runs < 1)
        throw ConfigError("config: n_runs must be at least 1");
    if (c.grid_strides.np < 1 || c.grid_strides.f < 1 || c.grid_strides.cr < 1)
        throw ConfigError("config: grid strides must be at least 1");
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
        throw ConfigError("config: train_fraction must lie in (0, 1)");
    if (c.families.empty())
        throw ConfigError("config: families must not be empty");
    if (std::set<Family>(c.families.begin(), c.families.end()).size() != c.families.size())
        throw ConfigError("config: duplicate family");
    if (c.search_budget < 1)
        throw ConfigError("config: search_budget must be at least 1");
    if (c.cv_folds < 2)
        throw ConfigError("config: cv_folds must be at least 2");
    if (c.workers < 1)
        throw ConfigError("config: workers must be at least 1");
    if (c.output_dir.empty())
        throw ConfigError("config: output_dir must not be empty");
    for (int d : c.dimensions) {
        const long b = c.budget_for(d);
        if (b < np_multiplier_max * d)
            throw ConfigError("config: max_fes " + std::to_string(b) + " is smaller than the largest NP (" + std::to_string(np_multiplier_max * d)
                + ") at d = " + std::to_string(d));
    }
}

inline const char* transform_name(TargetTransform t) { return t == TargetTransform::raw ? "raw" : "log10"; }

inline TargetTransform parse_transform(const std::string& s)
{
    if (s == "raw") return TargetTransform::raw;
    if (s == "log10") return TargetTransform::log10;
    throw ConfigError("config: target_transform must be \"raw\" or \"log10\", got \"" + s + "\"");
}

/// Settings that determine results; workers and output_dir are excluded.
inline nlohmann::ordered_json scientific_json(const ExperimentConfig& c)
{
    nlohmann::ordered_json j;
    auto& p = j["problems"] = nlohmann::ordered_json::array();
    for (auto id : c.problems)
        p.push_back(problem_label(id));
    j["dimensions"] = c.dimensions;
    j["n_runs"] = c.n_runs;
    if (c.max_fes)
        j["max_fes"] = *c.max_fes;
    else
        j["max_fes_per_dim"] = c.max_fes_per_dim;
    j["grid_strides"] = {{"np", c.grid_strides.np}, {"f", c.grid_strides.f}, {"cr", c.grid_strides.cr}};
    j["train_fraction"] = c.train_fraction;
    auto& f = j["families"] = nlohmann::ordered_json::array();
    for (auto fam : c.families)
        f.push_back(family_name(fam));
    j["search_budget"] = c.search_budget;
    j["cv_folds"] = c.cv_folds;
    j["master_seed"] = c.master_seed;
    j["target_transform"] = transform_name(c.target_transform);
    j["suite_seed"] = c.suite_seed;
    return j;
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& c)
{
    auto j = scientific_json(c);
    j["output_dir"] = c.output_dir;
    j["workers"] = c.workers;
    return j;
}

inline std::string hex16(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string config_hash(const ExperimentConfig& c) { return hex16(fnv1a(scientific_json(c).dump())); }

/// Keys starting with '_' are treated as comments; any other unknown key is an
/// error so that typos do not silently fall back to defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw ConfigError("config: top level must be a JSON object");
    static const std::set<std::string> known{"problems", "dimensions", "n_runs", "max_fes", "max_fes_per_dim", "grid_strides",
        "train_fraction", "families", "search_budget", "cv_folds", "master_seed", "output_dir", "workers", "target_transform", "suite_seed"};
    for (const auto& [k, v] : j.items())
        if (!k.starts_with('_') && !known.contains(k))
            throw ConfigError("config: unknown key \"" + k + "\"");
    ExperimentConfig c;
    try {
        if (j.contains("problems")) {
            c.problems.clear();
            for (const auto& p : j.at("problems"))
                c.problems.push_back(parse_problem_id(p.get<std::string>()));
        }
        if (j.contains("dimensions"))
            c.dimensions = j.at("dimensions").get<std::vector<int>>();
        c.n_runs = j.value("n_runs", c.n_runs);
        if (j.contains("max_fes") && j.contains("max_fes_per_dim"))
            throw ConfigError("config: give either max_fes or max_fes_per_dim, not both");
        if (j.contains("max_fes"))
            c.max_fes = j.at("max_fes").get<long>();
        c.max_fes_per_dim = j.value("max_fes_per_dim", c.max_fes_per_dim);
        if (j.contains("grid_strides")) {
            const auto& g = j.at("grid_strides");
            for (const auto& [k, v] : g.items())
                if (k != "np" && k != "f" && k != "cr")
                    throw ConfigError("config: unknown grid stride \"" + k + "\"");
            c.grid_strides = {g.value("np", 1), g.value("f", 1), g.value("cr", 1)};
        }
        c.train_fraction = j.value("train_fraction", c.train_fraction);
        if (j.contains("families")) {
            c.families.clear();
            for (const auto& f : j.at("families"))
                c.families.push_back(parse_family(f.get<std::string>()));
        }
        c.search_budget = j.value("search_budget", c.search_budget);
        c.cv_folds = j.value("cv_folds", c.cv_folds);
        c.master_seed = j.value("master_seed", c.master_seed);
        c.output_dir = j.value("output_dir", c.output_dir);
        c.workers = j.value("workers", c.workers);
        if (j.contains("target_transform"))
            c.target_transform = parse_transform(j.at("target_transform").get<std::string>());
        c.suite_seed = j.value("suite_seed", c.suite_seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    validate(c);
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

/// Seed of one task, derived from the master seed and (stage, problem, dimension, index).
inline std::uint64_t stage_seed(std::uint64_t master, std::string_view stage, ProblemId pid, int d, std::uint64_t index)
{
    const std::string key = std::string(stage) + '|' + problem_label(pid) + '|' + std::to_string(d) + '|' + std::to_string(index);
    return mix_seed(master, fnv1a(key));
}

inline std::string provenance_text(const ExperimentConfig& c)
{
    return std::string(tool_name) + ' ' + std::string(tool_version) + " master_seed=" + std::to_string(c.master_seed)
        + " config_hash=" + config_hash(c) + " rng=" + std::string(rng_name);
}

inline nlohmann::ordered_json provenance_json(const ExperimentConfig& c)
{
    return {{"tool", tool_name}, {"version", tool_version}, {"master_seed", c.master_seed}, {"config_hash", config_hash(c)},
        {"rng", rng_name}, {"config", scientific_json(c)}};
}

struct OutputLayout {
    std::filesystem::path root;

    std::filesystem::path performance_csv() const { return root / "performance.csv"; }
    std::filesystem::path split_json() const { return root / "split.json"; }
    std::filesystem::path model_json(ProblemId pid, int d, Family f) const { return root / "models" / (group_stem(pid, d) + "_" + family_name(f) + ".json"); }
    std::filesystem::path report_csv() const { return root / "report.csv"; }
    std::filesystem::path scatter_csv(ProblemId pid, int d, Family f) const { return root / "scatter" / (group_stem(pid, d) + "_" + family_name(f) + ".csv"); }
    std::filesystem::path kde_csv(ProblemId pid, int d) const { return root / "kde" / (group_stem(pid, d) + ".csv"); }
    std::filesystem::path summary_md() const { return root / "summary.md"; }

    static std::string group_stem(ProblemId pid, int d) { return problem_label(pid) + "_d" + std::to_string(d); }
};

inline OutputLayout layout_of(const ExperimentConfig& c) { return {c.output_dir}; }

// ---------------------------------------------------------------- collect

struct PlannedRecord {
    ProblemId problem;
    int dimension;
    GridPoint point;
    std::uint64_t base_seed;
    long max_fes;
};

inline std::vector<PlannedRecord> collection_plan(const ExperimentConfig& c)
{
    std::vector<PlannedRecord> plan;
    for (auto pid : c.problems)
        for (int d : c.dimensions)
            for (const auto& gp : grid_points(d, c.grid_strides))
                plan.push_back({pid, d, gp, stage_seed(c.master_seed, "collect", pid, d, gp.index), c.budget_for(d)});
    return plan;
}

inline std::string record_key(ProblemId pid, int d, const ParameterConfig& cfg, int n_runs, long max_fes, std::uint64_t base_seed)
{
    return problem_label(pid) + '|' + std::to_string(d) + '|' + std::to_string(cfg.np) + '|' + format_double(cfg.f) + '|' + format_double(cfg.cr)
        + '|' + std::to_string(n_runs) + '|' + std::to_string(max_fes) + '|' + std::to_string(base_seed);
}

inline std::string record_key(const PerformanceRecord& r)
{
    return record_key(r.problem_id, r.dimension, r.config, r.n_runs, r.max_fes, r.base_seed);
}

inline std::string record_key(const PlannedRecord& p, int n_runs)
{
    return record_key(p.problem, p.dimension, p.point.config, n_runs, p.max_fes, p.base_seed);
}

inline std::string format_seconds(double s)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1fs", s);
    return buf;
}

/// Measures every planned record not already present in the performance
/// CSV. Rows are appended as they finish (so an interrupted run resumes),
/// then the file is rewritten in canonical plan order. Returns the number of
/// newly measured rows.
inline std::size_t cmd_collect(const ExperimentConfig& c, std::ostream& log)
{
    validate(c);
    const auto out = layout_of(c);
    const auto plan = collection_plan(c);

    std::map<std::string, PerformanceRecord> have;
    if (std::filesystem::exists(out.performance_csv())) {
        for (auto& r : parse_performance(read_csv(out.performance_csv())))
            have.emplace(record_key(r), std::move(r));
    }
    std::vector<std::size_t> todo;
    std::set<std::string> planned_keys;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto key = record_key(plan[i], c.n_runs);
        planned_keys.insert(key);
        if (!have.contains(key))
            todo.push_back(i);
    }
    std::size_t foreign = 0;
    for (const auto& [k, r] : have)
        foreign += planned_keys.contains(k) ? 0 : 1;
    if (foreign > 0)
        log << "collect: dropping " << foreign << " existing rows that do not belong to this configuration\n";
    log << "collect: " << plan.size() << " records planned, " << plan.size() - todo.size() << " already present, " << todo.size() << " to run\n";

    std::map<std::pair<ProblemId, int>, ProblemInstance> problems;
    for (auto pid : c.problems)
        for (int d : c.dimensions)
            problems.emplace(std::pair{pid, d}, make_problem(pid, d, c.suite_seed));

    auto canonical_text = [&] {
        std::string text = "# " + provenance_text(c) + "\n" + std::string(performance_header) + "\n";
        for (const auto& p : plan) {
            auto it = have.find(record_key(p, c.n_runs));
            if (it != have.end())
                text += performance_row(it->second) + '\n';
        }
        return text;
    };

    std::vector<PerformanceRecord> fresh(todo.size());
    if (!todo.empty()) {
        // Start from a clean file (no foreign rows, no truncated last line) so
        // appended rows always begin on a fresh line.
        write_file_atomic(out.performance_csv(), canonical_text());
        std::ofstream append(out.performance_csv(), std::ios::app);
        if (!append)
            throw std::runtime_error("collect: cannot write " + out.performance_csv().string());

        std::mutex mu;
        std::size_t done = 0;
        const auto t0 = std::chrono::steady_clock::now();
        auto last = t0;
        parallel_for(todo.size(), c.workers, [&](std::size_t t) {
            const auto& p = plan[todo[t]];
            fresh[t] = measure_config(problems.at({p.problem, p.dimension}), p.point.config, c.n_runs, p.base_seed, p.max_fes);
            const std::string row = performance_row(fresh[t]);
            std::lock_guard lock(mu);
            append << row << '\n' << std::flush;
            ++done;
            const auto now = std::chrono::steady_clock::now();
            if (done == todo.size() || now - last > std::chrono::seconds(2)) {
                last = now;
                const double el = std::chrono::duration<double>(now - t0).count();
                const double eta = el / static_cast<double>(done) * static_cast<double>(todo.size() - done);
                log << "collect: " << done << '/' << todo.size() << " elapsed " << format_seconds(el) << " eta " << format_seconds(eta) << '\n';
            }
        });
        if (!append)
            throw std::runtime_error("collect: write failed for " + out.performance_csv().string());
    }
    for (auto& r : fresh)
        have.emplace(record_key(r), std::move(r));

    write_file_atomic(out.performance_csv(), canonical_text());
    return todo.size();
}

// ---------------------------------------------------------------- split

struct GroupData {
    ProblemId problem;
    int dimension;
    std::vector<PerformanceRecord> records; // canonical grid order
    Dataset dataset;
    SplitResult split;
};

/// Records of every (problem, dimension) group, in plan order; throws if any
/// planned record is missing from the performance CSV.
inline std::vector<GroupData> load_groups(const ExperimentConfig& c)
{
    const auto out = layout_of(c);
    if (!std::filesystem::exists(out.performance_csv()))
        throw MissingArtifact("missing " + out.performance_csv().string() + " (run collect first)");
    std::map<std::string, PerformanceRecord> have;
    for (auto& r : parse_performance(read_csv(out.performance_csv())))
        have.emplace(record_key(r), std::move(r));

    std::vector<GroupData> groups;
    for (auto pid : c.problems)
        for (int d : c.dimensions) {
            GroupData g{pid, d, {}, {}, {}};
            std::size_t missing = 0;
            const auto pts = grid_points(d, c.grid_strides);
            for (const auto& gp : pts) {
                const auto key = record_key(pid, d, gp.config, c.n_runs, c.budget_for(d), stage_seed(c.master_seed, "collect", pid, d, gp.index));
                auto it = have.find(key);
                if (it == have.end())
                    ++missing;
                else
                    g.records.push_back(it->second);
            }
            if (missing > 0)
                throw MissingArtifact("performance data for " + problem_label(pid) + " d=" + std::to_string(d) + " is missing " + std::to_string(missing)
                    + " of " + std::to_string(pts.size()) + " records (run collect first)");
            g.dataset = make_dataset(g.records, c.target_transform, FeatureEncoding::full_grid(d));
            groups.push_back(std::move(g));
        }
    return groups;
}

inline void cmd_split(const ExperimentConfig& c, std::ostream& log)
{
    validate(c);
    auto groups = load_groups(c);
    nlohmann::ordered_json j;
    j["_provenance"] = provenance_json(c);
    auto& arr = j["groups"] = nlohmann::ordered_json::array();
    for (auto& g : groups) {
        g.split = split(g.dataset, c.train_fraction, stage_seed(c.master_seed, "split", g.problem, g.dimension, 0));
        nlohmann::ordered_json e;
        e["problem_id"] = problem_label(g.problem);
        e["dimension"] = g.dimension;
        e["n_records"] = g.records.size();
        e["train_indices"] = g.split.train_indices;
        e["test_indices"] = g.split.test_indices;
        e["train_fingerprint"] = fingerprint(g.split.train);
        e["test_fingerprint"] = fingerprint(g.split.test);
        arr.push_back(std::move(e));
        log << "split: " << problem_label(g.problem) << " d=" << g.dimension << " train " << g.split.train.size() << " test " << g.split.test.size() << '\n';
    }
    write_file_atomic(layout_of(c).split_json(), j.dump(2) + "\n");
}

/// Groups with their split restored from split.json; the fingerprints in the
/// manifest must match the data rebuilt from the performance CSV.
inline std::vector<GroupData> load_split_groups(const ExperimentConfig& c)
{
    auto groups = load_groups(c);
    const auto path = layout_of(c).split_json();
    if (!std::filesystem::exists(path))
        throw MissingArtifact("missing " + path.string() + " (run split first)");
    const auto j = nlohmann::json::parse(read_file(path));
    if (j.at("_provenance").at("config_hash").get<std::string>() != config_hash(c))
        throw MissingArtifact(path.string() + " was produced by a different configuration (run split again)");
    const auto& arr = j.at("groups");
    for (auto& g : groups) {
        const nlohmann::json* entry = nullptr;
        for (const auto& e : arr)
            if (e.at("problem_id").get<std::string>() == problem_label(g.problem) && e.at("dimension").get<int>() == g.dimension)
                entry = &e;
        if (!entry)
            throw MissingArtifact(path.string() + " has no entry for " + problem_label(g.problem) + " d=" + std::to_string(g.dimension));
        g.split.train_indices = entry->at("train_indices").get<std::vector<std::size_t>>();
        g.split.test_indices = entry->at("test_indices").get<std::vector<std::size_t>>();
        for (auto i : g.split.train_indices)
            if (i >= g.dataset.size())
                throw MissingArtifact(path.string() + ": train index out of range");
        for (auto i : g.split.test_indices)
            if (i >= g.dataset.size())
                throw MissingArtifact(path.string() + ": test index out of range");
        g.split.train = g.dataset.subset(g.split.train_indices, SplitTag::train);
        g.split.test = g.dataset.subset(g.split.test_indices, SplitTag::test);
        if (fingerprint(g.split.train) != entry->at("train_fingerprint").get<std::string>()
            || fingerprint(g.split.test) != entry->at("test_fingerprint").get<std::string>())
            throw MissingArtifact(path.string() + ": fingerprints for " + problem_label(g.problem) + " d=" + std::to_string(g.dimension)
                + " do not match the performance data (run split again)");
    }
    return groups;
}

// ---------------------------------------------------------------- train

inline std::uint64_t fit_seed(const ExperimentConfig& c, ProblemId pid, int d, Family f)
{
    return stage_seed(c.master_seed, "fit", pid, d, static_cast<std::uint64_t>(f));
}

inline std::uint64_t search_seed(const ExperimentConfig& c, ProblemId pid, int d, Family f)
{
    return stage_seed(c.master_seed, "search", pid, d, static_cast<std::uint64_t>(f));
}

struct TrainedModels {
    /// Keyed by (group position, family).
    std::map<std::pair<std::size_t, Family>, FittedSurrogate> models;
};

/// Random search then a final fit on the whole training split, per
/// (problem, dimension, family). Writes one model report JSON each.
inline TrainedModels cmd_train(const ExperimentConfig& c, std::ostream& log)
{
    validate(c);
    const auto groups = load_split_groups(c);
    const auto out = layout_of(c);
    const HyperparamSpace space;
    TrainedModels trained;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        for (auto fam : c.families) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto sseed = search_seed(c, g.problem, g.dimension, fam);
            const auto res = random_search(fam, space, c.search_budget, g.split.train, c.cv_folds, sseed, c.workers);
            const auto fseed = fit_seed(c, g.problem, g.dimension, fam);
            auto model = fit_surrogate(g.split.train, res.best_hp, fseed);

            nlohmann::ordered_json j;
            j["_provenance"] = provenance_json(c);
            j["problem_id"] = problem_label(g.problem);
            j["dimension"] = g.dimension;
            j["family"] = family_name(fam);
            j["best_hp"] = to_json(res.best_hp);
            j["cv_rmse"] = res.cv_rmse;
            j["training_fingerprint"] = model.training_fingerprint();
            j["seed"] = fseed;
            j["search_seed"] = sseed;
            j["best_index"] = res.best_index;
            auto& cands = j["candidates"] = nlohmann::ordered_json::array();
            for (const auto& cand : res.candidates) {
                nlohmann::ordered_json e;
                e["hp"] = to_json(cand.hp);
                if (cand.cv_rmse)
                    e["cv_rmse"] = *cand.cv_rmse;
                else
                    e["failure"] = cand.failure;
                cands.push_back(std::move(e));
            }
            write_file_atomic(out.model_json(g.problem, g.dimension, fam), j.dump(2) + "\n");
            const double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            log << "train: " << problem_label(g.problem) << " d=" << g.dimension << ' ' << family_name(fam) << " cv_rmse " << format_double(res.cv_rmse)
                << " in " << format_seconds(el) << '\n';
            trained.models.emplace(std::pair{gi, fam}, std::move(model));
        }
    }
    return trained;
}

// ---------------------------------------------------------------- evaluate

inline std::string format_metric(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }

inline constexpr std::string_view report_header = "problem_id,dimension,family,rmse,pcc,srcc,emd,n_test,emd_joint";

/// Refits (or reuses, when `trained` is given) each model from its report,
/// checks its training fingerprint, and writes report.csv, scatter/ and kde/.
inline std::vector<EvaluationReport> cmd_evaluate(const ExperimentConfig& c, std::ostream& log, const TrainedModels* trained = nullptr)
{
    validate(c);
    const auto groups = load_split_groups(c);
    const auto out = layout_of(c);
    const std::string prov = "# " + provenance_text(c) + "\n";
    std::string report = prov + std::string(report_header) + "\n";
    std::vector<EvaluationReport> reports;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        const std::string train_fp = fingerprint(g.split.train);
        std::vector<FittedSurrogate> models;
        for (auto fam : c.families) {
            const auto path = out.model_json(g.problem, g.dimension, fam);
            if (!std::filesystem::exists(path))
                throw MissingArtifact("missing " + path.string() + " (run train first)");
            const auto j = nlohmann::json::parse(read_file(path));
            if (j.at("_provenance").at("config_hash").get<std::string>() != config_hash(c))
                throw MissingArtifact(path.string() + " was produced by a different configuration (run train again)");
            const auto recorded_fp = j.at("training_fingerprint").get<std::string>();
            if (recorded_fp != train_fp)
                throw FingerprintMismatch(path.string() + ": model was trained on " + recorded_fp + ", current training split is " + train_fp);
            if (trained) {
                auto it = trained->models.find({gi, fam});
                if (it != trained->models.end()) {
                    models.push_back(it->second);
                    continue;
                }
            }
            const auto hp = hyperparams_from_json(fam, j.at("best_hp"));
            models.push_back(fit_surrogate(g.split.train, hp, j.at("seed").get<std::uint64_t>()));
        }
        auto rep = build_report(problem_label(g.problem), g.dimension, g.split.test, train_fp, models,
            stage_seed(c.master_seed, "evaluate", g.problem, g.dimension, 0));
        for (const auto& note : rep.notes)
            log << "evaluate: " << note << '\n';
        for (const auto& r : rep.rows)
            report += r.problem_id + ',' + std::to_string(r.dimension) + ',' + family_name(r.family) + ',' + format_double(r.rmse) + ','
                + format_metric(r.pcc) + ',' + format_metric(r.srcc) + ',' + format_double(r.emd) + ',' + std::to_string(r.n_test) + ','
                + format_double(r.emd_joint) + '\n';
        for (const auto& sc : rep.scatter) {
            std::string text = prov + "observed,predicted\n";
            for (const auto& [o, p] : sc.observed_predicted)
                text += format_double(o) + ',' + format_double(p) + '\n';
            write_file_atomic(out.scatter_csv(g.problem, g.dimension, sc.family), text);
        }
        std::string kde_text = prov + "value,density,series\n";
        for (const auto& s : rep.kde)
            for (const auto& pt : s.curve)
                kde_text += format_double(pt.value) + ',' + format_double(pt.density) + ',' + s.series + '\n';
        write_file_atomic(out.kde_csv(g.problem, g.dimension), kde_text);
        log << "evaluate: " << problem_label(g.problem) << " d=" << g.dimension << " done\n";
        reports.push_back(std::move(rep));
    }
    write_file_atomic(out.report_csv(), report);
    return reports;
}

// ---------------------------------------------------------------- report

/// Scientific notation with four decimals and a signed, unpadded exponent,
/// e.g. 1.3605E-1 or 1.1228E+1.
inline std::string format_table_value(double v)
{
    if (!std::isfinite(v))
        return format_double(v);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4E", v);
    std::string s = buf;
    const auto e = s.find('E');
    std::string mant = s.substr(0, e);
    const char sign = s[e + 1];
    std::string digits = s.substr(e + 2);
    while (digits.size() > 1 && digits.front() == '0')
        digits.erase(digits.begin());
    return mant + "E" + (sign == '-' ? "-" : "+") + digits;
}

/// Index of the best defined value (argmin or argmax); the first wins ties.
inline std::optional<std::size_t> best_index(const std::vector<std::optional<double>>& v, bool minimise)
{
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i])
            continue;
        if (!best || (minimise ? *v[i] < *v[*best] : *v[i] > *v[*best]))
            best = i;
    }
    return best;
}

inline std::optional<double> parse_metric(const std::string& s)
{
    if (s == "undefined")
        return std::nullopt;
    return parse_double(s);
}

/// Markdown tables shaped like the published comparison tables: one block per
/// (problem, dimension), rows RMSE / PCC / SRCC, one column per family.
inline std::string render_summary(const ExperimentConfig& c, const CsvTable& report)
{
    static constexpr std::array<Family, 4> column_order{Family::GP, Family::RBFN, Family::RF, Family::SVR};
    std::vector<Family> columns;
    for (auto f : column_order)
        if (std::find(c.families.begin(), c.families.end(), f) != c.families.end())
            columns.push_back(f);

    const std::size_t c_pid = report.column("problem_id"), c_d = report.column("dimension"), c_fam = report.column("family"),
                      c_rmse = report.column("rmse"), c_pcc = report.column("pcc"), c_srcc = report.column("srcc");
    std::map<std::string, std::map<Family, const std::vector<std::string>*>> by_group;
    for (const auto& row : report.rows)
        by_group[row[c_pid] + "|" + row[c_d]][parse_family(row[c_fam])] = &row;

    std::ostringstream md;
    md << "<!-- " << provenance_text(c) << " -->\n";
    md << "# Surrogate accuracy on the held-out test set (" << columns.size() << " model families)\n\n";
    md << "Best value per row in bold (lowest RMSE, highest PCC and SRCC; first column wins ties).\n";
    for (auto pid : c.problems)
        for (int d : c.dimensions) {
            const auto key = problem_label(pid) + "|" + std::to_string(d);
            auto it = by_group.find(key);
            if (it == by_group.end())
                throw MissingArtifact("report.csv has no rows for " + problem_label(pid) + " d=" + std::to_string(d) + " (run evaluate first)");
            md << "\n## " << problem_label(pid) << " (d=" << d << ")\n\n| Metric |";
            for (auto f : columns)
                md << ' ' << family_name(f) << " |";
            md << "\n|---|";
            for (std::size_t i = 0; i < columns.size(); ++i)
                md << "---|";
            md << '\n';
            const std::array<std::pair<const char*, std::size_t>, 3> metrics{{{"RMSE", c_rmse}, {"PCC", c_pcc}, {"SRCC", c_srcc}}};
            for (const auto& [name, col] : metrics) {
                std::vector<std::optional<double>> vals;
                for (auto f : columns) {
                    auto r = it->second.find(f);
                    if (r == it->second.end())
                        throw MissingArtifact("report.csv has no " + std::string(family_name(f)) + " row for " + problem_label(pid) + " d=" + std::to_string(d));
                    vals.push_back(parse_metric((*r->second)[col]));
                }
                const auto best = best_index(vals, std::string_view(name) == "RMSE");
                md << "| " << name << " |";
                for (std::size_t i = 0; i < vals.size(); ++i) {
                    const std::string cell = vals[i] ? format_table_value(*vals[i]) : "undefined";
                    md << ' ' << (best && *best == i ? "**" + cell + "**" : cell) << " |";
                }
                md << '\n';
            }
        }
    return md.str();
}

inline void cmd_report(const ExperimentConfig& c, std::ostream& log)
{
    validate(c);
    const auto out = layout_of(c);
    if (!std::filesystem::exists(out.report_csv()))
        throw MissingArtifact("missing " + out.report_csv().string() + " (run evaluate first)");
    write_file_atomic(out.summary_md(), render_summary(c, read_csv(out.report_csv())));
    log << "report: wrote " << out.summary_md().string() << '\n';
}

inline void cmd_all(const ExperimentConfig& c, std::ostream& log)
{
    cmd_collect(c, log);
    cmd_split(c, log);
    const auto trained = cmd_train(c, log);
    cmd_evaluate(c, log, &trained);
    cmd_report(c, log);
}

} // namespace epm

#endif // EPM_EXPERIMENT_HPP
