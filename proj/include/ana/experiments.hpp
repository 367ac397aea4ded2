#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ana/distributions.hpp"
#include "ana/histogram.hpp"
#include "ana/trainer.hpp"

namespace ana {

// Flat key = value configuration with [section] headers.  Keys are addressed
// as "section.key"; later assignments win, so overrides are plain set() calls.
class Config {
public:
    static Config parse(std::istream& is);
    static Config parse_file(const std::string& path);

    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    std::string get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& dflt) const;
    double get_num(const std::string& key) const;
    double get_num_or(const std::string& key, double dflt) const;
    long get_int(const std::string& key) const;
    long get_int_or(const std::string& key, long dflt) const;
    bool get_flag_or(const std::string& key, bool dflt) const;
    std::vector<int> get_ints(const std::string& key) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const {
        return entries_;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

// Built-in settings for a named experiment (paper-default budgets and true
// parameters); unknown names throw.
Config experiment_defaults(const std::string& name);

// Parses a config file and fills unset keys from the defaults of its
// experiment.name.
Config load_experiment_config(const std::string& path);

struct RunArtifacts {
    std::string out_dir;
    std::string history_path;    // empty for runs without a training loop
    std::string summary_path;
    std::vector<std::pair<std::string, std::string>> summary;
    TrainResult result;

    // Looks a value up in the summary (throws if missing).
    const std::string& summary_value(const std::string& key) const;
    double summary_number(const std::string& key) const;
};

// Runs one experiment end to end: data, training (or the closed-form
// estimate for mle-oracle, or the divergence scan for cir-landscape),
// artifact files.  Returns what was written and the in-memory result.
RunArtifacts run_experiment(const Config& cfg);

// Writes the synthetic dataset and a manifest that regenerates it.  The
// manifest is itself a config file: loading it and calling make_dataset
// again reproduces the data byte for byte.
std::string make_dataset(const Config& cfg);  // returns the manifest path

struct ScanArtifacts {
    std::string tau_path, kappa_path;
    std::vector<std::pair<double, double>> tau_curve;    // (value, divergence)
    std::vector<std::pair<double, double>> kappa_curve;
};

// Discrete-divergence landscape over the tau and kappa grids, using common
// random numbers so the curve is exactly zero at the true value.
ScanArtifacts run_scan(const Config& cfg);

struct CompareReport {
    double ks = 1.0;
    bool moments_compared = false;
    double sample_mean = 0.0, sample_variance = 0.0;
    double target_mean = 0.0, target_variance = 0.0;
};

// Two-sample KS statistic of the sample against fresh draws from the target,
// plus first/second moment comparison when the target has finite moments.
CompareReport compare_sample(std::span<const double> sample, const TargetDist& target,
                             std::uint64_t seed, std::size_t target_draws = 10000);

// Reads one numeric column from a headed CSV file.
std::vector<double> read_csv_column(const std::string& path, int column = 0);

void write_histogram_csv(const std::string& path, const Histogram& h);

}  // namespace ana
