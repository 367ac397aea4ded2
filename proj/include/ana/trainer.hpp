#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ana/losses.hpp"
#include "ana/mlp.hpp"
#include "ana/optim.hpp"
#include "ana/tape.hpp"

namespace ana {

// Row-major matrix; observations are stored one sample per column.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// What is being estimated: named scalar parameters, a generator network that
// turns noise into parameter samples, or both.
struct Estimand {
    struct Scalar {
        std::string name;
        double value = 0.0;
    };
    std::vector<Scalar> scalars;
    std::optional<Mlp> generator;
    NoiseSpec noise;  // latent input of the generator, when present

    std::size_t parameter_count() const;
    // Scalars in order, then the generator parameters.
    std::vector<double> flatten() const;
    void set_from_flat(std::span<const double> flat);
};

// Couples the estimand to a forward model.  simulate() must build an
// (obs_dim x batch) node of simulated observations on the tape from the
// staged parameter parts: one 1x1 node per estimand scalar, in order,
// followed by the (out_dim x batch) generator output when one is present.
// idx names the columns of the real batch being matched, so simulators that
// condition on observed inputs can line up with them.
struct ModelBinding {
    int obs_dim = 0;
    Matrix observations;
    std::function<Var(Tape& tape, std::span<const Var> parts, std::span<const int> idx,
                      std::mt19937_64& rng)>
        simulate;
    // Simulators with a positivity constraint (diffusion states, rates) bump
    // this when a simulated value crosses below zero; the trainer drains it
    // into the run's event counts once per iteration.
    std::shared_ptr<long> negative_events;
};

struct TrainConfig {
    LossKind loss = LossKind::Vanilla;
    OptimizerSpec model_opt;  // updates the estimand
    OptimizerSpec disc_opt;
    std::vector<int> disc_hidden = {20, 20, 20};
    int batch = 0;        // simulated/real samples per update; 0 = full dataset
    int disc_steps = 1;   // discriminator updates per outer iteration
    int model_steps = 1;  // estimand updates per outer iteration
    long iterations = 1000;
    // Stop once |disc loss - equilibrium| stays below this for five
    // consecutive iterations; 0 runs to the iteration budget.
    double stop_threshold = 0.0;
    double clip = 0.1;  // wasserstein weight bound
    std::uint64_t seed = 1;
    long checkpoint_interval = 0;  // iterations between checkpoints; 0 = off
    std::string checkpoint_dir = ".";
    // Affine per-feature normalization of discriminator inputs, fitted on the
    // observation set.
    bool standardize_inputs = true;
};

struct HistoryRow {
    long iteration = 0;
    double model_loss = 0.0;
    double disc_loss = 0.0;
    std::vector<double> estimates;
    double wall_time_s = 0.0;
};

struct EventCounts {
    long saturation = 0;
    long negative_rate = 0;
    long linesearch_fallback = 0;
};

struct TrainHistory {
    std::vector<std::string> estimate_names;
    std::vector<HistoryRow> rows;
    EventCounts events;
    bool stopped_early = false;
};

struct TrainResult {
    Estimand estimand;
    Mlp discriminator;
    TrainHistory history;
    std::string last_checkpoint;  // empty when checkpointing is off
};

TrainResult train(const TrainConfig& cfg, const ModelBinding& binding, Estimand init);

// Continues a run from a checkpoint file; cfg must describe the same setup
// that produced it.  The returned history contains the full trajectory.
TrainResult train_resume(const TrainConfig& cfg, const ModelBinding& binding,
                         const std::string& checkpoint_path);

// Discriminator loss on explicit real/simulated batches (columns = samples),
// optionally standardized with the given per-feature mean and sd.
double evaluate_discrepancy(const Mlp& disc, const Matrix& real, const Matrix& fake,
                            LossKind kind, std::span<const double> feat_mean = {},
                            std::span<const double> feat_sd = {});

// Draws parameter samples from a trained generator: one column per draw.
Matrix sample_generator(const Estimand& est, int count, std::mt19937_64& rng);

// Writes iteration, model_loss, disc_loss, one column per scalar estimate,
// then wall_time_s.  Identical runs produce byte-identical files except for
// the trailing wall-time column.
void write_history_csv(const std::string& path, const TrainHistory& history);

}  // namespace ana
