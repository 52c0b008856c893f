#ifndef EPM_SURROGATES_SURROGATE_HPP
#define EPM_SURROGATES_SURROGATE_HPP

// One fit/predict contract over the four regression families, their
// hyperparameter spaces, and random-search tuning with k-fold CV.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include <epm/config_space.hpp>
#include <epm/parallel.hpp>
#include <epm/random.hpp>
#include <epm/surrogates/gp.hpp>
#include <epm/surrogates/random_forest.hpp>
#include <epm/surrogates/rbfn.hpp>
#include <epm/surrogates/svr.hpp>

namespace epm {

enum class Family { GP, RF, SVR, RBFN };

inline constexpr std::array<Family, 4> all_families{Family::GP, Family::RF, Family::SVR, Family::RBFN};

inline const char* family_name(Family f)
{
    switch (f) {
    case Family::GP: return "GP";
    case Family::RF: return "RF";
    case Family::SVR: return "SVR";
    case Family::RBFN: return "RBFN";
    }
    return "?";
}

inline Family parse_family(const std::string& s)
{
    for (auto f : all_families)
        if (s == family_name(f))
            return f;
    throw std::invalid_argument("unknown surrogate family '" + s + "'");
}

struct GpHyper {
    gp::Kernel kernel = gp::Kernel::rbf;
    double noise_floor = 1e-6;
    int restarts = 5;
    friend bool operator==(const GpHyper&, const GpHyper&) = default;
};

using RfHyper = rf::Params;
using SvrHyper = svr::Params;
using RbfnHyper = rbfn::Params;

using Hyperparams = std::variant<GpHyper, RfHyper, SvrHyper, RbfnHyper>;

inline Family family_of(const Hyperparams& hp) { return static_cast<Family>(hp.index()); }

inline nlohmann::ordered_json to_json(const Hyperparams& hp)
{
    nlohmann::ordered_json j;
    std::visit(
        [&](const auto& h) {
            using T = std::decay_t<decltype(h)>;
            if constexpr (std::is_same_v<T, GpHyper>) {
                j["kernel"] = gp::kernel_name(h.kernel);
                j["noise_floor"] = h.noise_floor;
                j["restarts"] = h.restarts;
            } else if constexpr (std::is_same_v<T, RfHyper>) {
                j["n_trees"] = h.n_trees;
                j["min_samples_split"] = h.min_samples_split;
                j["max_features_fraction"] = h.max_features_fraction;
                j["criterion"] = rf::criterion_name(h.criterion);
                j["min_samples_leaf"] = h.min_samples_leaf;
                j["bootstrap"] = h.bootstrap;
            } else if constexpr (std::is_same_v<T, SvrHyper>) {
                j["kernel"] = svr::kernel_name(h.kernel);
                j["epsilon"] = h.epsilon;
                j["C"] = h.c;
                j["gamma"] = h.gamma;
            } else {
                j["n_centers"] = h.n_centers;
                j["width_multiplier"] = h.width_multiplier;
                j["ridge"] = h.ridge;
            }
        },
        hp);
    return j;
}

inline Hyperparams hyperparams_from_json(Family family, const nlohmann::json& j)
{
    switch (family) {
    case Family::GP: {
        GpHyper h;
        h.kernel = gp::parse_kernel(j.at("kernel").get<std::string>());
        h.noise_floor = j.value("noise_floor", h.noise_floor);
        h.restarts = j.value("restarts", h.restarts);
        return h;
    }
    case Family::RF: {
        RfHyper h;
        h.n_trees = j.at("n_trees").get<int>();
        h.min_samples_split = j.at("min_samples_split").get<int>();
        h.max_features_fraction = j.at("max_features_fraction").get<double>();
        h.criterion = rf::parse_criterion(j.at("criterion").get<std::string>());
        h.min_samples_leaf = j.at("min_samples_leaf").get<int>();
        h.bootstrap = j.value("bootstrap", true);
        return h;
    }
    case Family::SVR: {
        SvrHyper h;
        h.kernel = svr::parse_kernel(j.at("kernel").get<std::string>());
        h.epsilon = j.at("epsilon").get<double>();
        h.c = j.at("C").get<double>();
        h.gamma = j.at("gamma").get<double>();
        return h;
    }
    case Family::RBFN: {
        RbfnHyper h;
        h.n_centers = j.at("n_centers").get<int>();
        h.width_multiplier = j.at("width_multiplier").get<double>();
        h.ridge = j.at("ridge").get<double>();
        return h;
    }
    }
    throw std::invalid_argument("unknown family");
}

/// Canonical text of a hyperparameter point; equal keys mean equal fits.
inline std::string hyperparams_key(const Hyperparams& hp) { return std::string(family_name(family_of(hp))) + to_json(hp).dump(); }

/// A trained regression model mapping encoded (NP, F, CR) to predicted error.
class FittedSurrogate {
public:
    using State = std::variant<gp::Model, rf::Forest, svr::Model, rbfn::Model>;

    FittedSurrogate(Hyperparams hp, State state, std::string training_fingerprint, std::uint64_t seed)
        : hp_(std::move(hp)), state_(std::make_shared<const State>(std::move(state))), fingerprint_(std::move(training_fingerprint)), seed_(seed)
    {
    }

    Family family() const { return family_of(hp_); }
    const Hyperparams& hyperparams() const { return hp_; }
    const State& state() const { return *state_; }
    const std::string& training_fingerprint() const { return fingerprint_; }
    std::uint64_t seed() const { return seed_; }

    double predict(const Features& x) const
    {
        const Eigen::Map<const Eigen::RowVectorXd> q(x.data(), 3);
        return std::visit([&](const auto& m) { return m.predict(q); }, *state_);
    }

    std::vector<double> predict(const Dataset& ds) const
    {
        std::vector<double> out;
        out.reserve(ds.size());
        for (const auto& s : ds.samples)
            out.push_back(predict(s.x));
        return out;
    }

private:
    Hyperparams hp_;
    std::shared_ptr<const State> state_;
    std::string fingerprint_;
    std::uint64_t seed_ = 0;
};

inline FittedSurrogate gp_fit(const Dataset& train, const GpHyper& hp, std::uint64_t seed = 0)
{
    gp::Options opt;
    opt.kernel = hp.kernel;
    opt.noise_floor = hp.noise_floor;
    opt.restarts = hp.restarts;
    opt.seed = seed;
    return {hp, gp::fit(train.features(), train.targets(), opt), fingerprint(train), seed};
}

inline FittedSurrogate rf_fit(const Dataset& train, const RfHyper& hp, std::uint64_t seed = 0)
{
    return {hp, rf::Forest::fit(train.features(), train.targets(), hp, seed), fingerprint(train), seed};
}

inline FittedSurrogate svr_fit(const Dataset& train, const SvrHyper& hp, std::uint64_t seed = 0)
{
    return {hp, svr::Model::fit(train.features(), train.targets(), hp), fingerprint(train), seed};
}

inline FittedSurrogate rbfn_fit(const Dataset& train, const RbfnHyper& hp, std::uint64_t seed = 0)
{
    return {hp, rbfn::Model::fit(train.features(), train.targets(), hp, seed), fingerprint(train), seed};
}

inline FittedSurrogate fit_surrogate(const Dataset& train, const Hyperparams& hp, std::uint64_t seed)
{
    return std::visit(
        [&](const auto& h) -> FittedSurrogate {
            using T = std::decay_t<decltype(h)>;
            if constexpr (std::is_same_v<T, GpHyper>) return gp_fit(train, h, seed);
            else if constexpr (std::is_same_v<T, RfHyper>) return rf_fit(train, h, seed);
            else if constexpr (std::is_same_v<T, SvrHyper>) return svr_fit(train, h, seed);
            else return rbfn_fit(train, h, seed);
        },
        hp);
}

/// Ranges searched per family. Integer ranges are inclusive.
struct HyperparamSpace {
    std::vector<gp::Kernel> gp_kernels{gp::Kernel::rbf, gp::Kernel::rational_quadratic, gp::Kernel::matern52};

    std::array<int, 2> rf_trees{2, 100};
    std::array<int, 2> rf_min_samples_split{2, 11};
    std::array<double, 2> rf_max_features{0.001, 1.0};
    std::vector<rf::Criterion> rf_criteria{rf::Criterion::squared_error, rf::Criterion::absolute_error};
    std::array<int, 2> rf_min_samples_leaf{1, 11};

    std::vector<svr::Kernel> svr_kernels{svr::Kernel::rbf, svr::Kernel::sigmoid};
    std::array<double, 2> svr_epsilon{0.01, 1.0};
    std::array<double, 2> svr_c{1.0, 10.0};
    std::array<double, 2> svr_gamma{0.01, 1.0};

    std::array<int, 2> rbfn_centers{2, 100};
    std::array<double, 2> rbfn_width{0.25, 4.0};
    /// Sampled log-uniformly.
    std::array<double, 2> rbfn_ridge{1e-8, 1e-1};

    /// Draws one point; n_centers is capped at `max_centers` (the fit-part size).
    Hyperparams sample(Family f, Rng& rng, int max_centers = 100) const
    {
        auto pick_int = [&](const std::array<int, 2>& r) { return static_cast<int>(rng.integer(r[0], r[1])); };
        switch (f) {
        case Family::GP: {
            GpHyper h;
            h.kernel = gp_kernels[rng.index(gp_kernels.size())];
            return h;
        }
        case Family::RF: {
            RfHyper h;
            h.n_trees = pick_int(rf_trees);
            h.min_samples_split = pick_int(rf_min_samples_split);
            h.max_features_fraction = rng.uniform(rf_max_features[0], rf_max_features[1]);
            h.criterion = rf_criteria[rng.index(rf_criteria.size())];
            h.min_samples_leaf = pick_int(rf_min_samples_leaf);
            return h;
        }
        case Family::SVR: {
            SvrHyper h;
            h.kernel = svr_kernels[rng.index(svr_kernels.size())];
            h.epsilon = rng.uniform(svr_epsilon[0], svr_epsilon[1]);
            h.c = rng.uniform(svr_c[0], svr_c[1]);
            h.gamma = rng.uniform(svr_gamma[0], svr_gamma[1]);
            return h;
        }
        case Family::RBFN: {
            RbfnHyper h;
            const int hi = std::max(rbfn_centers[0], std::min(rbfn_centers[1], max_centers));
            h.n_centers = std::min(static_cast<int>(rng.integer(rbfn_centers[0], hi)), max_centers);
            h.width_multiplier = rng.uniform(rbfn_width[0], rbfn_width[1]);
            h.ridge = std::exp(rng.uniform(std::log(rbfn_ridge[0]), std::log(rbfn_ridge[1])));
            return h;
        }
        }
        throw std::invalid_argument("unknown family");
    }

    bool contains(const Hyperparams& hp) const
    {
        auto in = [](auto v, const auto& r) { return v >= r[0] && v <= r[1]; };
        return std::visit(
            [&](const auto& h) -> bool {
                using T = std::decay_t<decltype(h)>;
                if constexpr (std::is_same_v<T, GpHyper>)
                    return std::find(gp_kernels.begin(), gp_kernels.end(), h.kernel) != gp_kernels.end();
                else if constexpr (std::is_same_v<T, RfHyper>)
                    return in(h.n_trees, rf_trees) && in(h.min_samples_split, rf_min_samples_split)
                        && in(h.max_features_fraction, rf_max_features) && in(h.min_samples_leaf, rf_min_samples_leaf)
                        && std::find(rf_criteria.begin(), rf_criteria.end(), h.criterion) != rf_criteria.end();
                else if constexpr (std::is_same_v<T, SvrHyper>)
                    return in(h.epsilon, svr_epsilon) && in(h.c, svr_c) && in(h.gamma, svr_gamma)
                        && std::find(svr_kernels.begin(), svr_kernels.end(), h.kernel) != svr_kernels.end();
                else
                    return in(h.n_centers, rbfn_centers) && in(h.width_multiplier, rbfn_width) && in(h.ridge, rbfn_ridge);
            },
            hp);
    }
};

struct SearchCandidate {
    Hyperparams hp;
    std::optional<double> cv_rmse;
    std::string failure;
};

struct SearchResult {
    Hyperparams best_hp;
    double cv_rmse = 0.0;
    std::size_t best_index = 0;
    std::vector<SearchCandidate> candidates;
};

class SearchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double fold_rmse(const std::vector<double>& pred, const Dataset& val)
{
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - val.samples[i].target;
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(pred.size()));
}

/// Random search: `budget` uniform draws from `space`, each scored by the mean
/// validation RMSE over k folds; the lowest score wins, earliest draw on ties.
/// Identical draws are scored once. Candidates may be scored on `workers` threads.
/// `scorer`, when given, replaces the CV score (test hook).
inline SearchResult random_search(Family family, const HyperparamSpace& space, int budget, const Dataset& train, int k,
    std::uint64_t seed, int workers = 1,
    const std::function<double(const Hyperparams&, std::size_t)>& scorer = {})
{
    if (budget < 1)
        throw std::invalid_argument("random_search: budget must be at least 1");
    if (k < 2)
        throw std::invalid_argument("random_search: k must be at least 2");
    const auto folds = kfold(train, k, mix_seed(seed, 0x666f6c64ULL));
    std::size_t min_fit = train.size();
    for (const auto& f : folds)
        min_fit = std::min(min_fit, f.fit.size());

    Rng rng(mix_seed(seed, 0x73616d70ULL));
    SearchResult res;
    res.candidates.reserve(static_cast<std::size_t>(budget));
    for (int b = 0; b < budget; ++b)
        res.candidates.push_back({space.sample(family, rng, static_cast<int>(min_fit)), std::nullopt, {}});

    // Distinct keys in first-seen order.
    std::map<std::string, std::size_t> first_of;
    std::vector<std::size_t> unique;
    std::vector<std::size_t> owner(res.candidates.size());
    for (std::size_t c = 0; c < res.candidates.size(); ++c) {
        const auto key = hyperparams_key(res.candidates[c].hp);
        auto [it, inserted] = first_of.emplace(key, c);
        if (inserted)
            unique.push_back(c);
        owner[c] = it->second;
    }

    // One task per (unique candidate, fold).
    const std::size_t nf = folds.size();
    std::vector<double> scores(unique.size() * nf, 0.0);
    std::vector<std::string> errors(unique.size() * nf);
    parallel_for(unique.size() * (scorer ? 1 : nf), workers, [&](std::size_t task) {
        if (scorer) {
            scores[task * nf] = scorer(res.candidates[unique[task]].hp, unique[task]);
            return;
        }
        const std::size_t u = task / nf, f = task % nf;
        try {
            const auto model = fit_surrogate(folds[f].fit, res.candidates[unique[u]].hp, mix_seed(seed, 1000 + f));
            scores[task] = fold_rmse(model.predict(folds[f].validation), folds[f].validation);
            if (!std::isfinite(scores[task]))
                errors[task] = "non-finite validation RMSE";
        } catch (const std::exception& e) {
            errors[task] = e.what();
        }
    });

    std::vector<std::optional<double>> unique_score(unique.size());
    std::vector<std::string> unique_error(unique.size());
    for (std::size_t u = 0; u < unique.size(); ++u) {
        if (scorer) {
            unique_score[u] = scores[u * nf];
            continue;
        }
        double sum = 0.0;
        for (std::size_t f = 0; f < nf; ++f) {
            if (!errors[u * nf + f].empty()) {
                unique_error[u] = "fold " + std::to_string(f) + ": " + errors[u * nf + f];
                break;
            }
            sum += scores[u * nf + f];
        }
        if (unique_error[u].empty())
            unique_score[u] = sum / static_cast<double>(nf);
    }
    std::map<std::size_t, std::size_t> unique_pos;
    for (std::size_t u = 0; u < unique.size(); ++u)
        unique_pos[unique[u]] = u;

    bool found = false;
    for (std::size_t c = 0; c < res.candidates.size(); ++c) {
        const std::size_t u = unique_pos[owner[c]];
        res.candidates[c].cv_rmse = unique_score[u];
        res.candidates[c].failure = unique_error[u];
        if (unique_score[u] && (!found || *unique_score[u] < res.cv_rmse)) {
            found = true;
            res.cv_rmse = *unique_score[u];
            res.best_index = c;
            res.best_hp = res.candidates[c].hp;
        }
    }
    if (!found) {
        std::ostringstream msg;
        msg << "random_search(" << family_name(family) << "): all " << budget << " candidates failed:";
        for (std::size_t c = 0; c < res.candidates.size(); ++c)
            msg << "\n  [" << c << "] " << to_json(res.candidates[c].hp).dump() << ": " << res.candidates[c].failure;
        throw SearchError(msg.str());
    }
    return res;
}

} // namespace epm

#endif // EPM_SURROGATES_SURROGATE_HPP
