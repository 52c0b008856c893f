// Command-line driver for the experiment stages.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <epm/experiment.hpp>

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out;
};

epm::ExperimentConfig resolve(const Overrides& o)
{
    auto c = epm::load_config(o.config_path);
    if (o.seed)
        c.master_seed = *o.seed;
    if (o.workers)
        c.workers = *o.workers;
    if (o.out)
        c.output_dir = *o.out;
    epm::validate(c);
    return c;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Empirical performance models of differential evolution"};
    app.require_subcommand(1);
    Overrides o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Override master_seed");
        sub->add_option("--workers", o.workers, "Override worker count")->check(CLI::PositiveNumber);
        sub->add_option("--out", o.out, "Override output directory");
    };

    const std::vector<std::pair<std::string, std::string>> stages{
        {"collect", "Run DE over the configuration grid and write performance.csv"},
        {"split", "Write the train/test split manifest"},
        {"train", "Tune and fit every surrogate family"},
        {"evaluate", "Compute test metrics, scatter pairs and KDE curves"},
        {"report", "Render summary.md"},
        {"all", "Run every stage in order"},
    };
    for (const auto& [name, help] : stages)
        add_common(app.add_subcommand(name, help));

    auto* catalog = app.add_subcommand("catalog", "Print the benchmark catalog as JSON");
    int catalog_dim = 2;
    std::uint64_t suite_seed = epm::default_suite_seed;
    catalog->add_option("-d,--dimension", catalog_dim, "Problem dimension")->check(CLI::Range(2, 1000));
    catalog->add_option("--suite-seed", suite_seed, "Seed of the generated shifts and rotations");

    auto* trajectory = app.add_subcommand("trajectory", "Run DE once and write its (fes, best_value) trace as CSV");
    std::string problem = "F1";
    int dim = 2, np = 20;
    double f = 0.5, cr = 0.9;
    long max_fes = 0;
    std::uint64_t run_seed = 1;
    std::string traj_out;
    trajectory->add_option("-p,--problem", problem, "Problem id (F1..F20)");
    trajectory->add_option("-d,--dimension", dim, "Problem dimension");
    trajectory->add_option("--np", np, "Population size");
    trajectory->add_option("--f", f, "Evolution step size");
    trajectory->add_option("--cr", cr, "Crossover rate");
    trajectory->add_option("--max-fes", max_fes, "Evaluation budget (default 10000*d)");
    trajectory->add_option("--seed", run_seed, "Run seed");
    trajectory->add_option("-o,--output", traj_out, "Output CSV (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (catalog->parsed()) {
            std::cout << epm::catalog_json(epm::catalog(catalog_dim, suite_seed)).dump(2) << '\n';
            return 0;
        }
        if (trajectory->parsed()) {
            const auto inst = epm::make_problem(epm::parse_problem_id(problem), dim);
            const epm::DEConfig de{np, f, cr, max_fes > 0 ? max_fes : epm::default_max_fes(dim), run_seed};
            const auto run = epm::de_run(inst, de, {.record_trajectory = true});
            if (traj_out.empty()) {
                epm::write_trajectory_csv(std::cout, run);
            } else {
                std::ofstream os(traj_out);
                if (!os)
                    throw std::runtime_error("cannot write " + traj_out);
                epm::write_trajectory_csv(os, run);
            }
            return 0;
        }
        const auto cfg = resolve(o);
        const std::string stage = app.get_subcommands().front()->get_name();
        if (stage == "collect") epm::cmd_collect(cfg, std::cerr);
        else if (stage == "split") epm::cmd_split(cfg, std::cerr);
        else if (stage == "train") epm::cmd_train(cfg, std::cerr);
        else if (stage == "evaluate") epm::cmd_evaluate(cfg, std::cerr);
        else if (stage == "report") epm::cmd_report(cfg, std::cerr);
        else epm::cmd_all(cfg, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
