#include "ana/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>

#include "ana/errors.hpp"

namespace ana {

std::size_t Estimand::parameter_count() const {
    std::size_t n = scalars.size();
    if (generator) n += generator->parameter_count();
    return n;
}

std::vector<double> Estimand::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const Scalar& s : scalars) flat.push_back(s.value);
    if (generator) {
        std::vector<double> g = generator->flatten();
        flat.insert(flat.end(), g.begin(), g.end());
    }
    return flat;
}

void Estimand::set_from_flat(std::span<const double> flat) {
    if (flat.size() != parameter_count())
        throw ShapeError("estimand: flat size " + std::to_string(flat.size()) +
                         " does not match parameter count " +
                         std::to_string(parameter_count()));
    for (std::size_t i = 0; i < scalars.size(); ++i) scalars[i].value = flat[i];
    if (generator) generator->set_from_flat(flat.subspan(scalars.size()));
}

namespace {

constexpr int kStopWindow = 5;

struct Scaler {
    std::vector<double> mean, sdev;

    bool active() const { return !mean.empty(); }

    static Scaler fit(const Matrix& obs) {
        Scaler s;
        s.mean.assign(static_cast<std::size_t>(obs.rows), 0.0);
        s.sdev.assign(static_cast<std::size_t>(obs.rows), 0.0);
        for (int r = 0; r < obs.rows; ++r) {
            double m = 0.0;
            for (int c = 0; c < obs.cols; ++c) m += obs.at(r, c);
            m /= obs.cols;
            double v = 0.0;
            for (int c = 0; c < obs.cols; ++c) {
                double d = obs.at(r, c) - m;
                v += d * d;
            }
            v /= obs.cols;
            s.mean[static_cast<std::size_t>(r)] = m;
            s.sdev[static_cast<std::size_t>(r)] = std::sqrt(v) > 1e-12 ? std::sqrt(v) : 1.0;
        }
        return s;
    }

    Var apply(Tape& tape, Var x) const {
        if (!active()) return x;
        Var m = tape.leaf(static_cast<int>(mean.size()), 1, mean);
        Var s = tape.leaf(static_cast<int>(sdev.size()), 1, sdev);
        return (x - m) / s;
    }
};

std::vector<int> draw_batch(int total, int batch, std::mt19937_64& rng) {
    std::vector<int> idx;
    if (batch >= total) {  // full batch: every column, no randomness consumed
        idx.resize(static_cast<std::size_t>(total));
        for (int i = 0; i < total; ++i) idx[static_cast<std::size_t>(i)] = i;
        return idx;
    }
    idx.resize(static_cast<std::size_t>(batch));
    std::uniform_int_distribution<int> pick(0, total - 1);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

Var gather_columns(Tape& tape, const Matrix& m, std::span<const int> idx) {
    std::vector<double> vals(static_cast<std::size_t>(m.rows) * idx.size());
    for (int r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < idx.size(); ++c)
            vals[static_cast<std::size_t>(r) * idx.size() + c] = m.at(r, idx[c]);
    return tape.leaf(m.rows, static_cast<int>(idx.size()), vals);
}

void write_events(std::ostream& os, const EventCounts& e) {
    os << e.saturation << ' ' << e.negative_rate << ' ' << e.linesearch_fallback << '\n';
}

EventCounts read_events(std::istream& is) {
    EventCounts e;
    if (!(is >> e.saturation >> e.negative_rate >> e.linesearch_fallback))
        throw IoError("checkpoint: bad event counts");
    return e;
}

void save_estimand(std::ostream& os, const Estimand& est) {
    os << "estimand " << est.scalars.size() << ' ' << (est.generator ? 1 : 0) << '\n';
    char buf[40];
    for (const auto& s : est.scalars) {
        std::snprintf(buf, sizeof buf, "%.17g", s.value);
        os << s.name << ' ' << buf << '\n';
    }
    if (est.generator) {
        os << (est.noise.kind == NoiseSpec::Kind::StandardNormal ? "normal" : "uniform")
           << ' ' << est.noise.dim << '\n';
        save_mlp(os, *est.generator);
    }
}

Estimand load_estimand(std::istream& is) {
    std::string tag;
    std::size_t nscalars;
    int has_gen;
    if (!(is >> tag >> nscalars >> has_gen) || tag != "estimand")
        throw IoError("checkpoint: bad estimand header");
    Estimand est;
    for (std::size_t i = 0; i < nscalars; ++i) {
        Estimand::Scalar s;
        if (!(is >> s.name >> s.value)) throw IoError("checkpoint: bad estimand scalar");
        est.scalars.push_back(std::move(s));
    }
    if (has_gen) {
        std::string kind;
        if (!(is >> kind >> est.noise.dim)) throw IoError("checkpoint: bad noise spec");
        est.noise.kind = kind == "normal" ? NoiseSpec::Kind::StandardNormal
                                          : NoiseSpec::Kind::Uniform;
        est.generator = load_mlp(is);
    }
    return est;
}

struct TrainState {
    long next_iteration = 0;
    Estimand estimand;
    Mlp discriminator;
    Optimizer model_opt;
    Optimizer disc_opt;
    std::mt19937_64 rng;
    TrainHistory history;

    TrainState(const TrainConfig& cfg)
        : model_opt(cfg.model_opt), disc_opt(cfg.disc_opt), rng(cfg.seed) {}
};

void save_checkpoint(const std::string& path, const TrainState& st) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open checkpoint '" + path + "' for writing");
    os << "checkpoint 1\n" << st.next_iteration << '\n';
    save_estimand(os, st.estimand);
    save_mlp(os, st.discriminator);
    st.model_opt.save(os);
    st.disc_opt.save(os);
    os << st.rng << '\n';
    write_events(os, st.history.events);
    os << st.history.estimate_names.size();
    for (const auto& n : st.history.estimate_names) os << ' ' << n;
    os << '\n' << st.history.rows.size() << '\n';
    char buf[40];
    for (const HistoryRow& r : st.history.rows) {
        os << r.iteration;
        auto put = [&](double x) {
            std::snprintf(buf, sizeof buf, "%.17g", x);
            os << ' ' << buf;
        };
        put(r.model_loss);
        put(r.disc_loss);
        for (double e : r.estimates) put(e);
        put(r.wall_time_s);
        os << '\n';
    }
    if (!os) throw IoError("write to checkpoint '" + path + "' failed");
}

void load_checkpoint(const std::string& path, TrainState& st) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open checkpoint '" + path + "'");
    std::string tag;
    int version;
    if (!(is >> tag >> version) || tag != "checkpoint" || version != 1)
        throw IoError("'" + path + "' is not a version-1 checkpoint");
    if (!(is >> st.next_iteration)) throw IoError("checkpoint: bad iteration");
    st.estimand = load_estimand(is);
    st.discriminator = load_mlp(is);
    st.model_opt.load(is);
    st.disc_opt.load(is);
    if (!(is >> st.rng)) throw IoError("checkpoint: bad rng state");
    st.history.events = read_events(is);
    std::size_t names;
    if (!(is >> names)) throw IoError("checkpoint: bad estimate-name count");
    st.history.estimate_names.resize(names);
    for (auto& n : st.history.estimate_names)
        if (!(is >> n)) throw IoError("checkpoint: bad estimate name");
    std::size_t rows;
    if (!(is >> rows)) throw IoError("checkpoint: bad history length");
    st.history.rows.assign(rows, HistoryRow{});
    for (auto& r : st.history.rows) {
        r.estimates.resize(names);
        if (!(is >> r.iteration >> r.model_loss >> r.disc_loss))
            throw IoError("checkpoint: truncated history row");
        for (auto& e : r.estimates)
            if (!(is >> e)) throw IoError("checkpoint: truncated history row");
        if (!(is >> r.wall_time_s)) throw IoError("checkpoint: truncated history row");
    }
}

TrainResult run_training(const TrainConfig& cfg, const ModelBinding& binding,
                         TrainState st) {
    if (binding.observations.rows != binding.obs_dim)
        throw ShapeError("binding: observation rows do not match obs_dim");
    if (binding.observations.cols < 1) throw ShapeError("binding: no observations");
    if (!binding.simulate) throw ContractError("binding: missing simulator");
    if (cfg.disc_steps < 1 || cfg.model_steps < 1)
        throw ShapeError("train: disc_steps and model_steps must be >= 1");
    if (st.estimand.parameter_count() == 0)
        throw ShapeError("train: estimand has no parameters");

    const int N = binding.observations.cols;
    const int B = cfg.batch <= 0 ? N : std::min(cfg.batch, N);
    const LossPair pair = loss_pair(cfg.loss);
    Scaler scaler;
    if (cfg.standardize_inputs) scaler = Scaler::fit(binding.observations);

    TrainHistory& history = st.history;
    if (history.estimate_names.empty())
        for (const auto& s : st.estimand.scalars) history.estimate_names.push_back(s.name);

    std::vector<double> flat_disc = st.discriminator.flatten();
    std::vector<double> flat_model = st.estimand.flatten();
    Estimand scratch = st.estimand;

    Tape tape;
    std::string last_checkpoint;
    std::deque<double> stop_window;
    // Seed the stop window from the tail of a resumed history.
    for (std::size_t i = history.rows.size() > kStopWindow
                             ? history.rows.size() - kStopWindow
                             : 0;
         i < history.rows.size(); ++i)
        stop_window.push_back(
            std::abs(history.rows[i].disc_loss - pair.equilibrium_disc_loss));

    // Stages the estimand with the given parameter values and simulates a
    // batch; returns the simulated observations node.
    auto build_fake = [&](std::span<const double> params, std::span<const int> idx,
                          std::mt19937_64& r, StagedMlp* staged_gen_out,
                          std::vector<Var>* scalar_vars_out) -> Var {
        scratch.set_from_flat(params);
        std::vector<Var> parts;
        if (scalar_vars_out) scalar_vars_out->clear();
        for (const auto& s : scratch.scalars) {
            Var v = tape.leaf(s.value);
            parts.push_back(v);
            if (scalar_vars_out) scalar_vars_out->push_back(v);
        }
        if (scratch.generator) {
            StagedMlp staged = stage_mlp(tape, *scratch.generator);
            std::vector<double> noise =
                draw_noise(scratch.noise, static_cast<int>(idx.size()), r);
            Var u = tape.leaf(scratch.noise.dim, static_cast<int>(idx.size()), noise);
            parts.push_back(mlp_forward(tape, *scratch.generator, staged, u));
            if (staged_gen_out) *staged_gen_out = staged;
        }
        Var fake = binding.simulate(tape, parts, idx, r);
        if (tape.rows(fake) != binding.obs_dim ||
            tape.cols(fake) != static_cast<int>(idx.size()))
            throw ShapeError("binding.simulate returned a misshaped batch");
        return fake;
    };

    auto start = std::chrono::steady_clock::now();
    auto elapsed = [&]() {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    };

    auto abort_msg = [&](long it, const std::string& what) {
        return what + " at iteration " + std::to_string(it) +
               (last_checkpoint.empty() ? "; no checkpoint written"
                                        : "; last good checkpoint: " + last_checkpoint);
    };

    for (long it = st.next_iteration; it < cfg.iterations; ++it) {
        double ld_value = 0.0;
        for (int j = 0; j < cfg.disc_steps; ++j) {
            std::vector<int> idx = draw_batch(N, B, st.rng);
            tape.reset();
            StagedMlp staged_disc = stage_mlp(tape, st.discriminator);
            Var fake = build_fake(flat_model, idx, st.rng, nullptr, nullptr);
            Var real = gather_columns(tape, binding.observations, idx);
            Var d_fake = mlp_forward(tape, st.discriminator, staged_disc,
                                     scaler.apply(tape, fake));
            Var d_real = mlp_forward(tape, st.discriminator, staged_disc,
                                     scaler.apply(tape, real));
            Var ld;
            try {
                ld = discriminator_loss(cfg.loss, d_real, d_fake,
                                        &history.events.saturation);
            } catch (const DomainError& e) {
                // A simulation that went non-finite shows up here first for
                // the probability-based losses.  Abort like any other blow-up.
                throw TrainingError(abort_msg(it, e.what()));
            }
            ld_value = tape.value_scalar(ld);
            if (!std::isfinite(ld_value))
                throw TrainingError(abort_msg(it, "non-finite discriminator loss"));
            tape.backward(ld);
            std::vector<double> grad = mlp_gradient(tape, staged_disc);
            try {
                st.disc_opt.step(flat_disc, grad);
            } catch (const TrainingError& e) {
                throw TrainingError(abort_msg(it, e.what()));
            }
            st.discriminator.set_from_flat(flat_disc);
            if (pair.requires_clipping) {
                clip_weights(st.discriminator, cfg.clip);
                flat_disc = st.discriminator.flatten();
            }
        }

        double lf_value = 0.0;
        for (int g = 0; g < cfg.model_steps; ++g) {
            std::vector<int> idx = draw_batch(N, B, st.rng);
            // Freeze the noise for this update: every objective evaluation
            // (the line search included) replays the same draws.
            std::mt19937_64 frozen = st.rng;
            std::mt19937_64 advanced = st.rng;
            bool advanced_set = false;
            auto objective = [&](std::span<const double> params,
                                 std::span<double> grad_out) -> double {
                std::mt19937_64 r = frozen;
                tape.reset();
                StagedMlp staged_disc = stage_mlp(tape, st.discriminator);
                StagedMlp staged_gen;
                std::vector<Var> scalar_vars;
                Var fake = build_fake(params, idx, r, &staged_gen, &scalar_vars);
                Var real = gather_columns(tape, binding.observations, idx);
                Var d_fake = mlp_forward(tape, st.discriminator, staged_disc,
                                         scaler.apply(tape, fake));
                Var d_real = mlp_forward(tape, st.discriminator, staged_disc,
                                         scaler.apply(tape, real));
                Var lf;
                try {
                    lf = training_model_loss(cfg.loss, d_real, d_fake,
                                             &history.events.saturation);
                } catch (const DomainError& e) {
                    throw TrainingError(abort_msg(it, e.what()));
                }
                if (!advanced_set) {
                    advanced = r;
                    advanced_set = true;
                }
                double value = tape.value_scalar(lf);
                if (!grad_out.empty()) {
                    if (!std::isfinite(value))
                        throw TrainingError(abort_msg(it, "non-finite model loss"));
                    tape.backward(lf);
                    std::size_t off = 0;
                    for (Var v : scalar_vars) grad_out[off++] = tape.adjoint_scalar(v);
                    if (scratch.generator) {
                        std::vector<double> gg = mlp_gradient(tape, staged_gen);
                        std::copy(gg.begin(), gg.end(), grad_out.begin() + off);
                    }
                }
                return value;
            };
            try {
                lf_value = st.model_opt.step_with_objective(flat_model, objective);
            } catch (const TrainingError& e) {
                throw TrainingError(abort_msg(it, e.what()));
            }
            st.estimand.set_from_flat(flat_model);
            // The main stream moves past one replay of the frozen draws.
            st.rng = advanced;
            if (!std::isfinite(lf_value))
                throw TrainingError(abort_msg(it, "non-finite model loss"));
        }
        history.events.linesearch_fallback = st.model_opt.linesearch_fallbacks();
        if (binding.negative_events) {
            history.events.negative_rate += *binding.negative_events;
            *binding.negative_events = 0;
        }

        HistoryRow row;
        row.iteration = it + 1;
        row.model_loss = lf_value;
        row.disc_loss = ld_value;
        for (const auto& s : st.estimand.scalars) row.estimates.push_back(s.value);
        row.wall_time_s = elapsed();
        history.rows.push_back(std::move(row));
        st.next_iteration = it + 1;

        if (cfg.checkpoint_interval > 0 && (it + 1) % cfg.checkpoint_interval == 0) {
            last_checkpoint =
                cfg.checkpoint_dir + "/ckpt_" + std::to_string(it + 1) + ".txt";
            save_checkpoint(last_checkpoint, st);
        }

        stop_window.push_back(std::abs(ld_value - pair.equilibrium_disc_loss));
        if (static_cast<int>(stop_window.size()) > kStopWindow) stop_window.pop_front();
        if (cfg.stop_threshold > 0.0 &&
            static_cast<int>(stop_window.size()) == kStopWindow) {
            bool all_below = true;
            for (double d : stop_window)
                if (!(d < cfg.stop_threshold)) {
                    all_below = false;
                    break;
                }
            if (all_below) {
                history.stopped_early = true;
                break;
            }
        }
    }

    TrainResult res;
    res.estimand = std::move(st.estimand);
    res.discriminator = std::move(st.discriminator);
    res.history = std::move(st.history);
    res.last_checkpoint = last_checkpoint;
    return res;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const ModelBinding& binding, Estimand init) {
    TrainState st(cfg);
    st.estimand = std::move(init);
    const LossPair pair = loss_pair(cfg.loss);
    std::vector<int> widths;
    widths.push_back(binding.obs_dim);
    for (int w : cfg.disc_hidden) widths.push_back(w);
    widths.push_back(1);
    // The discriminator draws its init from a stream derived from the run
    // seed, leaving the main stream's draws to the training loop.
    std::mt19937_64 init_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    st.discriminator = make_mlp(widths, Activation::Tanh, pair.output_activation, init_rng);
    if (pair.requires_clipping) clip_weights(st.discriminator, cfg.clip);
    return run_training(cfg, binding, std::move(st));
}

TrainResult train_resume(const TrainConfig& cfg, const ModelBinding& binding,
                         const std::string& checkpoint_path) {
    TrainState st(cfg);
    load_checkpoint(checkpoint_path, st);
    return run_training(cfg, binding, std::move(st));
}

double evaluate_discrepancy(const Mlp& disc, const Matrix& real, const Matrix& fake,
                            LossKind kind, std::span<const double> feat_mean,
                            std::span<const double> feat_sd) {
    if (real.rows != fake.rows) throw ShapeError("evaluate_discrepancy: row mismatch");
    Tape tape;
    auto stage_input = [&](const Matrix& m) {
        Var x = tape.leaf(m.rows, m.cols, m.data);
        if (!feat_mean.empty()) {
            Var mu = tape.leaf(static_cast<int>(feat_mean.size()), 1, feat_mean);
            Var sd = tape.leaf(static_cast<int>(feat_sd.size()), 1, feat_sd);
            x = (x - mu) / sd;
        }
        return x;
    };
    Var d_real = mlp_forward(tape, disc, stage_input(real));
    Var d_fake = mlp_forward(tape, disc, stage_input(fake));
    Var ld = discriminator_loss(kind, d_real, d_fake);
    return tape.value_scalar(ld);
}

Matrix sample_generator(const Estimand& est, int count, std::mt19937_64& rng) {
    if (!est.generator) throw ContractError("sample_generator: estimand has no generator");
    const Mlp& g = *est.generator;
    Matrix out(g.output_dim(), count);
    std::vector<double> u(static_cast<std::size_t>(est.noise.dim));
    for (int c = 0; c < count; ++c) {
        std::vector<double> col = draw_noise(est.noise, 1, rng);
        std::copy(col.begin(), col.end(), u.begin());
        std::vector<double> y = mlp_apply(g, u);
        for (int r = 0; r < out.rows; ++r) out.at(r, c) = y[static_cast<std::size_t>(r)];
    }
    return out;
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "iteration,model_loss,disc_loss";
    for (const auto& n : history.estimate_names) os << ',' << n;
    os << ",wall_time_s\n";
    char buf[40];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        os << ',' << buf;
    };
    for (const HistoryRow& r : history.rows) {
        os << r.iteration;
        put(r.model_loss);
        put(r.disc_loss);
        for (double e : r.estimates) put(e);
        put(r.wall_time_s);
        os << '\n';
    }
    if (!os) throw IoError("write to '" + path + "' failed");
}

}  // namespace ana
