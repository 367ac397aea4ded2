#include "ana/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ana/errors.hpp"
#include "ana/models.hpp"
#include "ana/oracle.hpp"

namespace ana {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

// -- Config -------------------------------------------------------------------

Config Config::parse(std::istream& is) {
    Config cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": empty section name");
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (section.empty())
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": key outside any [section]");
        cfg.entries_.emplace_back(section + "." + key, value);
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config '" + path + "'");
    return parse(is);
}

bool Config::has(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return true;
    return false;
}

void Config::set(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
}

std::string Config::get(const std::string& key) const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
        if (it->first == key) return it->second;
    throw ConfigError("config: missing key '" + key + "'");
}

std::string Config::get_or(const std::string& key, const std::string& dflt) const {
    return has(key) ? get(key) : dflt;
}

double Config::get_num(const std::string& key) const {
    const std::string v = get(key);
    try {
        std::size_t used = 0;
        double x = std::stod(v, &used);
        if (trim(v.substr(used)).empty()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError("config: key '" + key + "' has non-numeric value '" + v + "'");
}

double Config::get_num_or(const std::string& key, double dflt) const {
    return has(key) ? get_num(key) : dflt;
}

long Config::get_int(const std::string& key) const {
    double x = get_num(key);
    long r = std::lround(x);
    if (std::abs(x - r) > 1e-9)
        throw ConfigError("config: key '" + key + "' must be an integer");
    return r;
}

long Config::get_int_or(const std::string& key, long dflt) const {
    return has(key) ? get_int(key) : dflt;
}

bool Config::get_flag_or(const std::string& key, bool dflt) const {
    if (!has(key)) return dflt;
    std::string v = get(key);
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError("config: key '" + key + "' has non-boolean value '" + v + "'");
}

std::vector<int> Config::get_ints(const std::string& key) const {
    std::vector<int> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' has non-integer entry '" +
                              item + "'");
        }
    }
    return out;
}

// -- defaults -------------------------------------------------------------------

Config experiment_defaults(const std::string& name) {
    Config c;
    c.set("experiment.name", name);
    c.set("experiment.seed", "1");
    c.set("experiment.out_dir", "runs/" + name);
    c.set("experiment.data", "generate");

    c.set("train.standardize", "true");
    c.set("train.noise", "uniform");
    c.set("train.noise_dim", "10");
    c.set("train.gen_hidden", "20,20");
    c.set("train.disc_hidden", "20,20,20");
    c.set("train.disc_steps", "1");
    c.set("train.model_steps", "1");
    c.set("train.stop_threshold", "0");
    c.set("train.clip", "0.1");
    c.set("train.checkpoint_interval", "0");

    auto poisson_common = [&] {
        c.set("model.grid_n", "100");
        c.set("model.observations", "1000");
        c.set("model.sigma_star", "0.1");
        c.set("train.loss", "wasserstein");
        c.set("train.batch", "32");
        c.set("optimizer.model", "rmsprop");
        c.set("optimizer.model_lr", "1e-4");
        c.set("optimizer.disc", "rmsprop");
        c.set("optimizer.disc_lr", "1e-4");
    };
    auto cir_common = [&] {
        c.set("model.kappa", "0.5");
        c.set("model.tau", "0.06");
        c.set("model.sigma", "0.08");
        c.set("model.alpha", "0.5");
        c.set("model.r0", "0.05");
        c.set("model.scheme", "milstein");
    };

    if (name == "poisson-uq") {
        poisson_common();
        c.set("model.mu_spec", "normal:0.3,0.1");
        c.set("train.init_sigma", "0.2");
        c.set("train.iterations", "38000");
    } else if (name == "poisson-mixture") {
        poisson_common();
        c.set("model.mu_spec", "mixture:0.4,0.3,0.1,0.6,0.8,0.05");
        c.set("train.iterations", "100000");
    } else if (name == "poisson-2d") {
        poisson_common();
        c.set("model.param_spec", "gauss2d:0.3,1.0,0.1,-0.05,0.1");
        c.set("train.iterations", "100000");
    } else if (name == "cir-tau") {
        cir_common();
        c.set("model.dt", "0.01");
        c.set("model.steps", "4000");
        c.set("train.loss", "kl");
        c.set("train.batch", "0");
        c.set("train.init_tau", "0.03");
        c.set("train.iterations", "5000");
        c.set("optimizer.model", "lbfgs");
        c.set("optimizer.model_lr", "1");
        // One scalar against an adversarial objective: without a step cap the
        // very first searches overshoot into the region where the standardized
        // fake batch saturates the discriminator and the run never recovers.
        c.set("optimizer.model_max_step", "0.01");
        c.set("optimizer.disc", "adam");
        c.set("optimizer.disc_lr", "1e-3");
    } else if (name == "cir-kappa") {
        cir_common();
        c.set("model.dt", "0.001");
        c.set("model.observations", "4000");
        c.set("model.resample_lo", "0.001");
        c.set("model.resample_hi", "0.03");
        c.set("train.loss", "kl");
        c.set("train.batch", "0");
        c.set("train.init_kappa", "0.3");
        c.set("train.iterations", "2000");
        c.set("train.disc_steps", "5");
        c.set("optimizer.model", "rmsprop");
        c.set("optimizer.model_lr", "1e-3");
        c.set("optimizer.disc", "rmsprop");
        c.set("optimizer.disc_lr", "1e-3");
    } else if (name == "cir-landscape") {
        cir_common();
        c.set("model.dt", "0.001");
        c.set("model.steps", "100000");
        c.set("model.bins", "50");
        c.set("model.realizations", "1");
        c.set("model.tau_lo", "0.02");
        c.set("model.tau_hi", "0.10");
        c.set("model.tau_step", "0.005");
        c.set("model.kappa_lo", "0.1");
        c.set("model.kappa_hi", "1.0");
        c.set("model.kappa_step", "0.05");
    } else if (name == "option-vol") {
        c.set("model.s0", "100");
        c.set("model.strike", "100");
        c.set("model.rate", "0.05");
        c.set("model.maturity", "1");
        c.set("model.sigma_star", "0.2");
        c.set("model.observations", "100");
        c.set("train.loss", "vanilla");
        c.set("train.batch", "0");
        c.set("train.init_sigma", "0.3");
        c.set("train.iterations", "30000");
        c.set("optimizer.model", "rmsprop");
        c.set("optimizer.model_lr", "1e-4");
        c.set("optimizer.disc", "rmsprop");
        c.set("optimizer.disc_lr", "1e-4");
    } else if (name == "mle-oracle") {
        cir_common();
        c.set("model.scheme", "em");
        c.set("model.dt", "0.01");
        c.set("model.steps", "4000");
    } else {
        throw ConfigError("unknown experiment '" + name + "'");
    }
    return c;
}

Config load_experiment_config(const std::string& path) {
    Config file = Config::parse_file(path);
    Config merged = experiment_defaults(file.get("experiment.name"));
    for (const auto& [k, v] : file.entries()) merged.set(k, v);
    return merged;
}

// -- datasets -------------------------------------------------------------------

namespace {

// Seed mixers keep the data, generator-init, and sampling streams apart from
// the training stream while staying reproducible from one run seed.
constexpr std::uint64_t kDataSeedMix = 0xd1b54a32d192ed03ull;
constexpr std::uint64_t kGenInitSeedMix = 0x94d049bb133111ebull;
constexpr std::uint64_t kSampleSeedMix = 0x2545f4914f6cdd1dull;

// Fills unset keys from the experiment's defaults.
Config resolved(const Config& cfg) {
    Config merged = experiment_defaults(cfg.get("experiment.name"));
    for (const auto& [k, v] : cfg.entries()) merged.set(k, v);
    return merged;
}

bool is_poisson(const std::string& name) { return name.rfind("poisson", 0) == 0; }

struct Dataset {
    Matrix obs;                 // discriminator inputs, one sample per column
    std::vector<double> cir_x;  // conditioning states for the rate experiments
    std::vector<double> path;   // full path when the data came from one
};

CirParams cir_params_from(const Config& cfg) {
    CirParams p;
    p.kappa = cfg.get_num("model.kappa");
    p.tau = cfg.get_num("model.tau");
    p.sigma = cfg.get_num("model.sigma");
    p.dt = cfg.get_num("model.dt");
    p.alpha = cfg.get_num_or("model.alpha", 0.5);
    return p;
}

GbmParams gbm_params_from(const Config& cfg) {
    GbmParams g;
    g.s0 = cfg.get_num("model.s0");
    g.strike = cfg.get_num("model.strike");
    g.rate = cfg.get_num("model.rate");
    g.sigma = cfg.get_num("model.sigma_star");
    g.maturity = cfg.get_num("model.maturity");
    return g;
}

Dataset pairs_to_dataset(PairSample pairs) {
    Dataset d;
    d.cir_x = std::move(pairs.x);
    d.obs = Matrix(1, static_cast<int>(pairs.y.size()));
    std::copy(pairs.y.begin(), pairs.y.end(), d.obs.data.begin());
    return d;
}

Dataset generate_data(const Config& cfg) {
    const std::string name = cfg.get("experiment.name");
    std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.get_int("experiment.seed")) ^
                        kDataSeedMix);
    Dataset d;
    if (is_poisson(name)) {
        const int n = static_cast<int>(cfg.get_int("model.grid_n"));
        const int count = static_cast<int>(cfg.get_int("model.observations"));
        d.obs = Matrix(n, count);
        if (name == "poisson-2d") {
            TargetDist2 td = TargetDist2::parse(cfg.get("model.param_spec"));
            for (int c = 0; c < count; ++c) {
                auto [mu, sigma] = td.sample(rng);
                std::vector<double> u = poisson_solve_values(mu, sigma, n);
                for (int r = 0; r < n; ++r) d.obs.at(r, c) = u[static_cast<std::size_t>(r)];
            }
        } else {
            TargetDist td = TargetDist::parse(cfg.get("model.mu_spec"));
            const double sigma = cfg.get_num("model.sigma_star");
            for (int c = 0; c < count; ++c) {
                double mu = td.sample(rng);
                std::vector<double> u = poisson_solve_values(mu, sigma, n);
                for (int r = 0; r < n; ++r) d.obs.at(r, c) = u[static_cast<std::size_t>(r)];
            }
        }
    } else if (name == "cir-tau" || name == "mle-oracle" || name == "cir-landscape") {
        CirParams p = cir_params_from(cfg);
        d.path = simulate_cir_path(cfg.get_num("model.r0"), cfg.get_int("model.steps"), p,
                                   scheme_from_name(cfg.get("model.scheme")), rng);
        PairSample pairs = pairs_from_path(d.path);
        Dataset pd = pairs_to_dataset(std::move(pairs));
        d.obs = std::move(pd.obs);
        d.cir_x = std::move(pd.cir_x);
    } else if (name == "cir-kappa") {
        CirParams p = cir_params_from(cfg);
        PairSample pairs = resample_uniform(
            cfg.get_num("model.resample_lo"), cfg.get_num("model.resample_hi"),
            static_cast<std::size_t>(cfg.get_int("model.observations")), p,
            scheme_from_name(cfg.get("model.scheme")), rng);
        d = pairs_to_dataset(std::move(pairs));
    } else if (name == "option-vol") {
        GbmParams g = gbm_params_from(cfg);
        const int count = static_cast<int>(cfg.get_int("model.observations"));
        d.obs = Matrix(1, count);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int c = 0; c < count; ++c)
            d.obs.at(0, c) = gbm_option_payoff_value(normal(rng), g);
    } else {
        throw ConfigError("unknown experiment '" + name + "'");
    }
    return d;
}

std::string data_file_name(const std::string& name) {
    if (is_poisson(name)) return "observations.csv";
    if (name == "cir-kappa") return "pairs.csv";
    if (name == "option-vol") return "payoffs.csv";
    return "path.csv";
}

void write_column_csv(const std::string& path, const std::string& header,
                      std::span<const double> values) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << header << '\n';
    for (double v : values) os << fmt17(v) << '\n';
    if (!os) throw IoError("write to '" + path + "' failed");
}

void write_dataset_files(const std::string& name, const std::string& file,
                         const Dataset& d) {
    if (is_poisson(name)) {
        std::ofstream os(file);
        if (!os) throw IoError("cannot open '" + file + "' for writing");
        for (int r = 0; r < d.obs.rows; ++r) os << (r ? "," : "") << "u_" << (r + 1);
        os << '\n';
        // one observation (solution vector) per row
        for (int c = 0; c < d.obs.cols; ++c) {
            for (int r = 0; r < d.obs.rows; ++r)
                os << (r ? "," : "") << fmt17(d.obs.at(r, c));
            os << '\n';
        }
        if (!os) throw IoError("write to '" + file + "' failed");
    } else if (name == "cir-kappa") {
        std::ofstream os(file);
        if (!os) throw IoError("cannot open '" + file + "' for writing");
        os << "x,y\n";
        for (std::size_t i = 0; i < d.cir_x.size(); ++i)
            os << fmt17(d.cir_x[i]) << ',' << fmt17(d.obs.at(0, static_cast<int>(i)))
               << '\n';
        if (!os) throw IoError("write to '" + file + "' failed");
    } else if (name == "option-vol") {
        write_column_csv(file, "payoff",
                         std::span<const double>(d.obs.data.data(), d.obs.data.size()));
    } else {
        write_column_csv(file, "r", d.path);
    }
}

Dataset load_data(const Config& cfg) {
    const std::string name = cfg.get("experiment.name");
    const std::string file = cfg.get_or(
        "experiment.data_file",
        cfg.get("experiment.out_dir") + "/" + data_file_name(name));
    Dataset d;
    if (is_poisson(name)) {
        std::ifstream is(file);
        if (!is) throw IoError("cannot open data file '" + file + "'");
        std::string line;
        if (!std::getline(is, line)) throw IoError("'" + file + "' is empty");
        std::vector<std::vector<double>> rows;
        while (std::getline(is, line)) {
            line = trim(line);
            if (line.empty()) continue;
            std::vector<double> row;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
            if (!rows.empty() && row.size() != rows.front().size())
                throw IoError("'" + file + "' has ragged rows");
            rows.push_back(std::move(row));
        }
        if (rows.empty()) throw IoError("'" + file + "' has no data rows");
        const int n = static_cast<int>(rows.front().size());
        d.obs = Matrix(n, static_cast<int>(rows.size()));
        for (std::size_t c = 0; c < rows.size(); ++c)
            for (int r = 0; r < n; ++r)
                d.obs.at(r, static_cast<int>(c)) = rows[c][static_cast<std::size_t>(r)];
    } else if (name == "cir-kappa") {
        PairSample pairs;
        pairs.x = read_csv_column(file, 0);
        pairs.y = read_csv_column(file, 1);
        d = pairs_to_dataset(std::move(pairs));
    } else if (name == "option-vol") {
        std::vector<double> v = read_csv_column(file, 0);
        d.obs = Matrix(1, static_cast<int>(v.size()));
        std::copy(v.begin(), v.end(), d.obs.data.begin());
    } else {
        d.path = read_csv_column(file, 0);
        Dataset pd = pairs_to_dataset(pairs_from_path(d.path));
        d.obs = std::move(pd.obs);
        d.cir_x = std::move(pd.cir_x);
    }
    return d;
}

Dataset obtain_data(const Config& cfg) {
    return cfg.get("experiment.data") == "load" ? load_data(cfg) : generate_data(cfg);
}

}  // namespace

std::string make_dataset(const Config& user_cfg) {
    Config cfg = resolved(user_cfg);
    const std::string name = cfg.get("experiment.name");
    const std::string out_dir = cfg.get("experiment.out_dir");
    std::filesystem::create_directories(out_dir);
    Dataset d = generate_data(cfg);
    write_dataset_files(name, out_dir + "/" + data_file_name(name), d);

    // The manifest is a config file holding exactly the generation inputs, so
    // running make_dataset on it reproduces the data byte for byte.
    const std::string manifest = out_dir + "/manifest.cfg";
    std::ofstream os(manifest);
    if (!os) throw IoError("cannot open '" + manifest + "' for writing");
    os << "[experiment]\n";
    os << "name = " << name << '\n';
    os << "seed = " << cfg.get_int("experiment.seed") << '\n';
    os << "data = generate\n";
    os << "\n[model]\n";
    std::vector<std::string> seen;
    for (auto it = cfg.entries().rbegin(); it != cfg.entries().rend(); ++it) {
        const auto& [k, v] = *it;
        if (k.rfind("model.", 0) != 0) continue;
        if (std::find(seen.begin(), seen.end(), k) != seen.end()) continue;
        seen.push_back(k);
    }
    std::sort(seen.begin(), seen.end());
    for (const auto& k : seen) os << k.substr(6) << " = " << cfg.get(k) << '\n';
    if (!os) throw IoError("write to '" + manifest + "' failed");
    return manifest;
}

// -- problem construction ---------------------------------------------------

namespace {

NoiseSpec noise_from(const Config& cfg) {
    NoiseSpec spec;
    const std::string kind = cfg.get("train.noise");
    if (kind == "uniform")
        spec.kind = NoiseSpec::Kind::Uniform;
    else if (kind == "normal")
        spec.kind = NoiseSpec::Kind::StandardNormal;
    else
        throw ConfigError("config: train.noise must be 'uniform' or 'normal'");
    spec.dim = static_cast<int>(cfg.get_int("train.noise_dim"));
    return spec;
}

Mlp make_generator(const Config& cfg, int out_dim) {
    std::vector<int> widths;
    widths.push_back(static_cast<int>(cfg.get_int("train.noise_dim")));
    for (int w : cfg.get_ints("train.gen_hidden")) widths.push_back(w);
    widths.push_back(out_dim);
    std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.get_int("experiment.seed")) ^
                        kGenInitSeedMix);
    return make_mlp(widths, Activation::Tanh, Activation::Linear, rng);
}

Var staged_normals(Tape& tape, int count, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> w(static_cast<std::size_t>(count));
    for (auto& x : w) x = normal(rng);
    return tape.leaf(1, count, w);
}

struct Problem {
    ModelBinding binding;
    Estimand init;
};

Problem build_problem(const Config& cfg, Dataset data) {
    const std::string name = cfg.get("experiment.name");
    Problem pb;
    pb.binding.obs_dim = data.obs.rows;
    pb.binding.observations = std::move(data.obs);

    if (is_poisson(name)) {
        const int n = static_cast<int>(cfg.get_int("model.grid_n"));
        pb.init.noise = noise_from(cfg);
        if (name == "poisson-uq") {
            pb.init.scalars = {{"sigma", cfg.get_num("train.init_sigma")}};
            pb.init.generator = make_generator(cfg, 1);
            pb.binding.simulate = [n](Tape& tape, std::span<const Var> parts,
                                      std::span<const int>, std::mt19937_64&) {
                return poisson_solve(tape, parts[1], parts[0], n);
            };
        } else if (name == "poisson-mixture") {
            const double sigma = cfg.get_num("model.sigma_star");
            pb.init.generator = make_generator(cfg, 1);
            pb.binding.simulate = [n, sigma](Tape& tape, std::span<const Var> parts,
                                             std::span<const int>, std::mt19937_64&) {
                return poisson_solve(tape, parts[0], tape.leaf(sigma), n);
            };
        } else {  // poisson-2d
            pb.init.generator = make_generator(cfg, 2);
            pb.binding.simulate = [n](Tape& tape, std::span<const Var> parts,
                                      std::span<const int>, std::mt19937_64&) {
                Var mu = tape.slice_rows(parts[0], 0, 1);
                Var sigma = tape.slice_rows(parts[0], 1, 1);
                return poisson_solve(tape, mu, sigma, n);
            };
        }
    } else if (name == "cir-tau" || name == "cir-kappa") {
        CirParams p = cir_params_from(cfg);
        const CirScheme scheme = scheme_from_name(cfg.get("model.scheme"));
        const bool estimate_tau = name == "cir-tau";
        pb.init.scalars = {estimate_tau
                               ? Estimand::Scalar{"tau", cfg.get_num("train.init_tau")}
                               : Estimand::Scalar{"kappa", cfg.get_num("train.init_kappa")}};
        auto x_states = std::make_shared<std::vector<double>>(std::move(data.cir_x));
        pb.binding.negative_events = std::make_shared<long>(0);
        auto negatives = pb.binding.negative_events;
        pb.binding.simulate = [p, scheme, estimate_tau, x_states, negatives](
                                  Tape& tape, std::span<const Var> parts,
                                  std::span<const int> idx, std::mt19937_64& rng) {
            std::vector<double> xv(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i)
                xv[i] = (*x_states)[static_cast<std::size_t>(idx[i])];
            Var x = tape.leaf(1, static_cast<int>(idx.size()), xv);
            Var w = staged_normals(tape, static_cast<int>(idx.size()), rng);
            Var kappa = estimate_tau ? tape.leaf(p.kappa) : parts[0];
            Var tau = estimate_tau ? parts[0] : tape.leaf(p.tau);
            Var sigma = tape.leaf(p.sigma);
            Var y = scheme == CirScheme::Milstein
                        ? cir_milstein_step(tape, x, w, kappa, tau, sigma, p.dt, p.alpha)
                        : cir_em_step(tape, x, w, kappa, tau, sigma, p.dt);
            for (double v : tape.value(y))
                if (v < 0.0) ++*negatives;
            return y;
        };
    } else if (name == "option-vol") {
        GbmParams g = gbm_params_from(cfg);
        pb.init.scalars = {{"sigma", cfg.get_num("train.init_sigma")}};
        pb.binding.simulate = [g](Tape& tape, std::span<const Var> parts,
                                  std::span<const int> idx, std::mt19937_64& rng) {
            Var w = staged_normals(tape, static_cast<int>(idx.size()), rng);
            return gbm_option_payoff(tape, w, parts[0], g);
        };
    } else {
        throw ConfigError("experiment '" + name + "' has no training problem");
    }
    return pb;
}

TrainConfig build_train_config(const Config& cfg) {
    TrainConfig tc;
    tc.loss = loss_from_name(cfg.get("train.loss"));
    tc.model_opt.kind = opt_from_name(cfg.get("optimizer.model"));
    tc.model_opt.lr = cfg.get_num("optimizer.model_lr");
    tc.model_opt.max_step = cfg.get_num_or("optimizer.model_max_step", 0.0);
    tc.disc_opt.kind = opt_from_name(cfg.get("optimizer.disc"));
    tc.disc_opt.lr = cfg.get_num("optimizer.disc_lr");
    tc.disc_opt.max_step = cfg.get_num_or("optimizer.disc_max_step", 0.0);
    tc.disc_hidden = cfg.get_ints("train.disc_hidden");
    tc.batch = static_cast<int>(cfg.get_int("train.batch"));
    tc.disc_steps = static_cast<int>(cfg.get_int("train.disc_steps"));
    tc.model_steps = static_cast<int>(cfg.get_int("train.model_steps"));
    tc.iterations = cfg.get_int("train.iterations");
    tc.stop_threshold = cfg.get_num("train.stop_threshold");
    tc.clip = cfg.get_num("train.clip");
    tc.seed = static_cast<std::uint64_t>(cfg.get_int("experiment.seed"));
    tc.checkpoint_interval = cfg.get_int("train.checkpoint_interval");
    tc.checkpoint_dir = cfg.get("experiment.out_dir");
    tc.standardize_inputs = cfg.get_flag_or("train.standardize", true);
    return tc;
}

double tail_mean(const TrainHistory& h, std::size_t scalar_index) {
    if (h.rows.empty()) throw ContractError("tail_mean: empty history");
    std::size_t tail = std::max<std::size_t>(1, h.rows.size() / 10);
    double acc = 0.0;
    for (std::size_t i = h.rows.size() - tail; i < h.rows.size(); ++i)
        acc += h.rows[i].estimates[scalar_index];
    return acc / static_cast<double>(tail);
}

void append_sample_stats(std::vector<std::pair<std::string, std::string>>& summary,
                         const Matrix& samples) {
    // columns = draws; report per-row mean/sd and, for two rows, the
    // covariance of (first row, |second row|)
    const int n = samples.cols;
    if (samples.rows == 1) {
        double m = 0.0, v = 0.0;
        for (int c = 0; c < n; ++c) m += samples.at(0, c);
        m /= n;
        for (int c = 0; c < n; ++c) {
            double d = samples.at(0, c) - m;
            v += d * d;
        }
        v /= n;
        summary.emplace_back("generated_mean", fmt17(m));
        summary.emplace_back("generated_sd", fmt17(std::sqrt(v)));
    } else if (samples.rows == 2) {
        double m0 = 0.0, m1 = 0.0;
        for (int c = 0; c < n; ++c) {
            m0 += samples.at(0, c);
            m1 += std::abs(samples.at(1, c));
        }
        m0 /= n;
        m1 /= n;
        double c00 = 0.0, c01 = 0.0, c11 = 0.0;
        for (int c = 0; c < n; ++c) {
            double d0 = samples.at(0, c) - m0;
            double d1 = std::abs(samples.at(1, c)) - m1;
            c00 += d0 * d0;
            c01 += d0 * d1;
            c11 += d1 * d1;
        }
        summary.emplace_back("generated_mean_mu", fmt17(m0));
        summary.emplace_back("generated_mean_abs_sigma", fmt17(m1));
        summary.emplace_back("generated_cov_mu_mu", fmt17(c00 / n));
        summary.emplace_back("generated_cov_mu_sigma", fmt17(c01 / n));
        summary.emplace_back("generated_cov_sigma_sigma", fmt17(c11 / n));
    }
}

void write_summary(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& summary) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    for (const auto& [k, v] : summary) os << k << " = " << v << '\n';
    if (!os) throw IoError("write to '" + path + "' failed");
}

RunArtifacts run_mle_oracle(const Config& cfg) {
    const std::string out_dir = cfg.get("experiment.out_dir");
    Dataset d = obtain_data(cfg);
    PairSample pairs = pairs_from_path(d.path);
    const double kappa = cfg.get_num("model.kappa");
    const double dt = cfg.get_num("model.dt");
    const double tau_true = cfg.get_num("model.tau");
    const double sigma = cfg.get_num("model.sigma");
    const double tau_hat = tau_mle(pairs, kappa, dt);
    const double sd =
        tau_mle_asymptotic_sd(kappa, sigma, dt, pairs.size(), tau_true);

    RunArtifacts art;
    art.out_dir = out_dir;
    art.summary.emplace_back("experiment", "mle-oracle");
    art.summary.emplace_back("seed", std::to_string(cfg.get_int("experiment.seed")));
    art.summary.emplace_back("n_pairs", std::to_string(pairs.size()));
    art.summary.emplace_back("tau_hat", fmt17(tau_hat));
    art.summary.emplace_back("tau_true", fmt17(tau_true));
    art.summary.emplace_back("abs_error", fmt17(std::abs(tau_hat - tau_true)));
    art.summary.emplace_back("asymptotic_sd", fmt17(sd));
    art.summary.emplace_back("within_3sd",
                             std::abs(tau_hat - tau_true) < 3.0 * sd ? "1" : "0");
    art.summary_path = out_dir + "/summary.txt";
    write_summary(art.summary_path, art.summary);
    return art;
}

}  // namespace

RunArtifacts run_experiment(const Config& user_cfg) {
    Config cfg = resolved(user_cfg);
    const std::string name = cfg.get("experiment.name");
    const std::string out_dir = cfg.get("experiment.out_dir");
    std::filesystem::create_directories(out_dir);

    if (name == "mle-oracle") return run_mle_oracle(cfg);
    if (name == "cir-landscape") {
        ScanArtifacts scan = run_scan(cfg);
        RunArtifacts art;
        art.out_dir = out_dir;
        art.summary.emplace_back("experiment", name);
        art.summary.emplace_back("tau_scan", scan.tau_path);
        art.summary.emplace_back("kappa_scan", scan.kappa_path);
        art.summary_path = out_dir + "/summary.txt";
        write_summary(art.summary_path, art.summary);
        return art;
    }

    Dataset data = obtain_data(cfg);
    Problem pb = build_problem(cfg, std::move(data));
    TrainConfig tc = build_train_config(cfg);

    RunArtifacts art;
    art.out_dir = out_dir;
    art.result = train(tc, pb.binding, std::move(pb.init));
    art.history_path = out_dir + "/history.csv";
    write_history_csv(art.history_path, art.result.history);

    art.summary.emplace_back("experiment", name);
    art.summary.emplace_back("seed", std::to_string(cfg.get_int("experiment.seed")));
    art.summary.emplace_back("loss", cfg.get("train.loss"));
    art.summary.emplace_back("iterations_run",
                             std::to_string(art.result.history.rows.size()));
    art.summary.emplace_back("stopped_early",
                             art.result.history.stopped_early ? "1" : "0");
    for (std::size_t i = 0; i < art.result.estimand.scalars.size(); ++i) {
        const auto& s = art.result.estimand.scalars[i];
        art.summary.emplace_back(s.name + "_final", fmt17(s.value));
        if (s.name == "sigma")
            art.summary.emplace_back("sigma_abs_final", fmt17(std::abs(s.value)));
        art.summary.emplace_back(s.name + "_tail_mean",
                                 fmt17(tail_mean(art.result.history, i)));
    }
    art.summary.emplace_back(
        "saturation_events", std::to_string(art.result.history.events.saturation));
    art.summary.emplace_back(
        "negative_events", std::to_string(art.result.history.events.negative_rate));
    art.summary.emplace_back(
        "linesearch_fallbacks",
        std::to_string(art.result.history.events.linesearch_fallback));

    if (art.result.estimand.generator) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.get_int("experiment.seed")) ^
                            kSampleSeedMix);
        Matrix samples = sample_generator(art.result.estimand, 10000, rng);
        append_sample_stats(art.summary, samples);
        const int bins = static_cast<int>(cfg.get_int_or("model.bins", 50));
        if (samples.rows == 1) {
            write_column_csv(
                out_dir + "/generated_samples.csv", "mu",
                std::span<const double>(samples.data.data(), samples.data.size()));
            write_histogram_csv(
                out_dir + "/generated_hist.csv",
                make_histogram(samples.data,
                               bins,
                               *std::min_element(samples.data.begin(), samples.data.end()),
                               *std::max_element(samples.data.begin(), samples.data.end())));
        } else {
            const std::string spath = out_dir + "/generated_samples.csv";
            std::ofstream os(spath);
            if (!os) throw IoError("cannot open '" + spath + "' for writing");
            os << "mu,sigma\n";
            for (int c = 0; c < samples.cols; ++c)
                os << fmt17(samples.at(0, c)) << ',' << fmt17(samples.at(1, c)) << '\n';
            if (!os) throw IoError("write to '" + spath + "' failed");
            for (int r = 0; r < samples.rows; ++r) {
                std::vector<double> coord(static_cast<std::size_t>(samples.cols));
                for (int c = 0; c < samples.cols; ++c)
                    coord[static_cast<std::size_t>(c)] =
                        r == 1 ? std::abs(samples.at(r, c)) : samples.at(r, c);
                write_histogram_csv(
                    out_dir + (r == 0 ? "/mu_hist.csv" : "/abs_sigma_hist.csv"),
                    make_histogram(coord, bins,
                                   *std::min_element(coord.begin(), coord.end()),
                                   *std::max_element(coord.begin(), coord.end())));
            }
        }
    }

    art.summary_path = out_dir + "/summary.txt";
    write_summary(art.summary_path, art.summary);
    return art;
}

// -- landscape scan -----------------------------------------------------------

namespace {

std::vector<double> grid_values(double lo, double hi, double step) {
    const int count = static_cast<int>(std::lround((hi - lo) / step)) + 1;
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = lo + i * step;
    return v;
}

void write_scan_csv(const std::string& path,
                    const std::vector<std::pair<double, double>>& curve) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "parameter_value,discrete_kl\n";
    for (const auto& [v, kl] : curve) os << fmt17(v) << ',' << fmt17(kl) << '\n';
    if (!os) throw IoError("write to '" + path + "' failed");
}

}  // namespace

ScanArtifacts run_scan(const Config& user_cfg) {
    Config cfg = resolved(user_cfg);
    if (cfg.get("experiment.name") != "cir-landscape")
        throw ConfigError("scan needs a cir-landscape config");
    const std::string out_dir = cfg.get("experiment.out_dir");
    std::filesystem::create_directories(out_dir);

    const CirParams base = cir_params_from(cfg);
    const CirScheme scheme = scheme_from_name(cfg.get("model.scheme"));
    const double r0 = cfg.get_num("model.r0");
    const long steps = cfg.get_int("model.steps");
    const int bins = static_cast<int>(cfg.get_int("model.bins"));
    const long reps = cfg.get_int("model.realizations");
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("experiment.seed"));

    std::vector<double> tau_grid =
        grid_values(cfg.get_num("model.tau_lo"), cfg.get_num("model.tau_hi"),
                    cfg.get_num("model.tau_step"));
    std::vector<double> kappa_grid =
        grid_values(cfg.get_num("model.kappa_lo"), cfg.get_num("model.kappa_hi"),
                    cfg.get_num("model.kappa_step"));
    // lo + i*step lands within rounding of the true parameter, not on it;
    // snap so the replayed path is bit-identical there and the curve's zero
    // is exact.
    auto snap = [](std::vector<double>& grid, double center) {
        for (double& g : grid)
            if (g != center && std::abs(g - center) < 1e-9 * std::max(1.0, std::abs(center)))
                g = center;
    };
    snap(tau_grid, base.tau);
    snap(kappa_grid, base.kappa);
    std::vector<double> tau_kl(tau_grid.size(), 0.0);
    std::vector<double> kappa_kl(kappa_grid.size(), 0.0);

    for (long rep = 0; rep < reps; ++rep) {
        // One increment stream per realization, replayed for every grid value
        // so the divergence vanishes exactly at the true parameters.
        std::mt19937_64 stream((seed + static_cast<std::uint64_t>(rep)) ^ kDataSeedMix);
        auto path_at = [&](const CirParams& q) {
            std::mt19937_64 r = stream;
            return simulate_cir_path(r0, steps, q, scheme, r);
        };
        std::vector<double> ref = path_at(base);
        for (std::size_t i = 0; i < tau_grid.size(); ++i) {
            CirParams q = base;
            q.tau = tau_grid[i];
            std::vector<double> trial = path_at(q);
            auto [h_ref, h_trial] = make_shared_histograms(ref, trial, bins);
            tau_kl[i] += discrete_kl(h_ref, h_trial);
        }
        for (std::size_t i = 0; i < kappa_grid.size(); ++i) {
            CirParams q = base;
            q.kappa = kappa_grid[i];
            std::vector<double> trial = path_at(q);
            auto [h_ref, h_trial] = make_shared_histograms(ref, trial, bins);
            kappa_kl[i] += discrete_kl(h_ref, h_trial);
        }
    }

    ScanArtifacts art;
    for (std::size_t i = 0; i < tau_grid.size(); ++i)
        art.tau_curve.emplace_back(tau_grid[i], tau_kl[i] / static_cast<double>(reps));
    for (std::size_t i = 0; i < kappa_grid.size(); ++i)
        art.kappa_curve.emplace_back(kappa_grid[i],
                                     kappa_kl[i] / static_cast<double>(reps));
    art.tau_path = out_dir + "/tau_scan.csv";
    art.kappa_path = out_dir + "/kappa_scan.csv";
    write_scan_csv(art.tau_path, art.tau_curve);
    write_scan_csv(art.kappa_path, art.kappa_curve);
    return art;
}

// -- comparison and small file utilities ---------------------------------------

CompareReport compare_sample(std::span<const double> sample, const TargetDist& target,
                             std::uint64_t seed, std::size_t target_draws) {
    if (sample.empty()) throw ShapeError("compare_sample: empty sample");
    std::mt19937_64 rng(seed);
    std::vector<double> draws = target.sample_many(target_draws, rng);
    CompareReport rep;
    rep.ks = two_sample_ks(sample, draws);
    if (target.has_moments()) {
        rep.moments_compared = true;
        double m = 0.0;
        for (double x : sample) m += x;
        m /= static_cast<double>(sample.size());
        double v = 0.0;
        for (double x : sample) v += (x - m) * (x - m);
        v /= static_cast<double>(sample.size());
        rep.sample_mean = m;
        rep.sample_variance = v;
        rep.target_mean = target.mean();
        rep.target_variance = target.variance();
    }
    return rep;
}

std::vector<double> read_csv_column(const std::string& path, int column) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(is, line)) throw IoError("'" + path + "' is empty");
    std::vector<double> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (int c = 0; c <= column; ++c)
            if (!std::getline(ss, cell, ','))
                throw IoError("'" + path + "' line " + std::to_string(lineno) +
                              ": missing column " + std::to_string(column));
        try {
            out.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw IoError("'" + path + "' line " + std::to_string(lineno) +
                          ": non-numeric cell '" + cell + "'");
        }
    }
    return out;
}

void write_histogram_csv(const std::string& path, const Histogram& h) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "bin_left,bin_right,mass\n";
    for (int b = 0; b < h.bins(); ++b)
        os << fmt17(h.lo + b * h.bin_width()) << ',' << fmt17(h.lo + (b + 1) * h.bin_width())
           << ',' << fmt17(h.mass[static_cast<std::size_t>(b)]) << '\n';
    if (!os) throw IoError("write to '" + path + "' failed");
}

const std::string& RunArtifacts::summary_value(const std::string& key) const {
    for (const auto& [k, v] : summary)
        if (k == key) return v;
    throw ContractError("summary has no key '" + key + "'");
}

double RunArtifacts::summary_number(const std::string& key) const {
    return std::stod(summary_value(key));
}

}  // namespace ana
