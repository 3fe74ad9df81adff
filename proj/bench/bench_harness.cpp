// Serial reference loop vs the OpenMP repetition kernel on a synthetic
// 271 x 24 data set with the full default configuration.
//
//   bench_harness [repetitions] [threads]

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <random>

#include "tb/dataset.hpp"
#include "tb/features.hpp"
#include "tb/harness.hpp"

namespace {

tb::Dataset synthetic(std::size_t n, std::size_t d)
{
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    tb::Dataset ds;
    ds.games = tb::default_games();
    tb::Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        tb::Participant p;
        p.id = "p" + std::to_string(i);
        for (std::size_t c = 0; c < d; ++c) x(i, c) = u(gen);
        p.choices = {x(i, 0) > 0.42 ? 0 : 1, x(i, 1) > 0.31 ? 0 : 1, static_cast<int>(gen() % 3)};
        ds.participants.push_back(std::move(p));
    }
    for (std::size_t c = 0; c < d; ++c) ds.attribute_names.push_back("a" + std::to_string(c));
    ds.attributes = std::move(x);
    return ds;
}

template <typename F>
double time_it(F&& f)
{
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv)
{
    tb::ExperimentConfig config;
    if (argc > 1) config.repetitions = std::atoi(argv[1]);
    tb::ExecutionOptions exec;
    if (argc > 2) exec.threads = std::atoi(argv[2]);

    const tb::Dataset ds = synthetic(271, 24);
    std::map<std::string, tb::FeatureMatrix> features;
    features.emplace("ours24", tb::select_attributes(ds));

    tb::ResultTable serial, parallel;
    const double ts = time_it([&] { serial = tb::run_experiment_serial(config, ds, features); });
    const double tp = time_it([&] { parallel = tb::run_experiment(config, ds, features, exec); });
    std::cout << "repetitions " << config.repetitions << "\n"
              << "serial    " << ts << " s\n"
              << "parallel  " << tp << " s (threads " << (exec.threads ? std::to_string(exec.threads) : "default") << ")\n"
              << "speedup   " << ts / tp << "\n"
              << "identical " << (serial == parallel ? "yes" : "no") << "\n";
    return serial == parallel ? 0 : 1;
}
