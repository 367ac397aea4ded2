#include "ana/distributions.hpp"

#include <cmath>
#include <sstream>

#include "ana/errors.hpp"

namespace ana {

namespace {

std::pair<std::string, std::vector<double>> split_spec(const std::string& spec) {
    auto colon = spec.find(':');
    std::string name = spec.substr(0, colon);
    std::vector<double> params;
    if (colon != std::string::npos) {
        std::string rest = spec.substr(colon + 1);
        std::istringstream in(rest);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            try {
                params.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw IoError("bad numeric parameter '" + tok + "' in '" + spec + "'");
            }
        }
    }
    return {name, params};
}

void need_params(const std::vector<double>& p, std::size_t n, const std::string& what) {
    if (p.size() != n)
        throw IoError(what + ": expected " + std::to_string(n) + " parameters, got " +
                      std::to_string(p.size()));
}

}  // namespace

double TargetDist::sample(std::mt19937_64& rng) const {
    switch (kind) {
        case Kind::Exponential: {
            std::exponential_distribution<double> d(params[0]);
            return d(rng);
        }
        case Kind::FisherF: {
            std::fisher_f_distribution<double> d(params[0], params[1]);
            return d(rng);
        }
        case Kind::Arcsine: {
            // X = sin^2(pi U / 2) has the arcsine law on [0, 1].
            std::uniform_real_distribution<double> u(0.0, 1.0);
            double s = std::sin(0.5 * M_PI * u(rng));
            return s * s;
        }
        case Kind::Beta: {
            std::gamma_distribution<double> ga(params[0], 1.0), gb(params[1], 1.0);
            double x = ga(rng);
            double y = gb(rng);
            return x / (x + y);
        }
        case Kind::Cauchy: {
            std::cauchy_distribution<double> d(params[0], params[1]);
            return d(rng);
        }
        case Kind::RaisedCosine: {
            // Rejection from the uniform envelope; acceptance rate 1/2.
            double mu = params[0], s = params[1];
            std::uniform_real_distribution<double> ux(mu - s, mu + s), uv(0.0, 1.0);
            for (;;) {
                double x = ux(rng);
                double accept = 0.5 * (1.0 + std::cos((x - mu) / s * M_PI));
                if (uv(rng) < accept) return x;
            }
        }
        case Kind::Normal: {
            std::normal_distribution<double> d(params[0], params[1]);
            return d(rng);
        }
        case Kind::GaussMixture: {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            double pick = u(rng);
            double acc = 0.0;
            for (std::size_t c = 0; c * 3 + 2 < params.size(); ++c) {
                acc += params[c * 3];
                if (pick < acc || c * 3 + 5 >= params.size()) {
                    std::normal_distribution<double> d(params[c * 3 + 1], params[c * 3 + 2]);
                    return d(rng);
                }
            }
            throw ContractError("mixture weights do not cover [0, 1)");
        }
    }
    throw ContractError("bad target kind");
}

std::vector<double> TargetDist::sample_many(std::size_t count, std::mt19937_64& rng) const {
    std::vector<double> out(count);
    for (auto& x : out) x = sample(rng);
    return out;
}

bool TargetDist::has_moments() const {
    switch (kind) {
        case Kind::Cauchy: return false;
        case Kind::FisherF: return params[1] > 4.0;
        default: return true;
    }
}

double TargetDist::mean() const {
    switch (kind) {
        case Kind::Exponential: return 1.0 / params[0];
        case Kind::FisherF:
            if (params[1] <= 2.0) throw DomainError("F mean undefined", params[1]);
            return params[1] / (params[1] - 2.0);
        case Kind::Arcsine: return 0.5;
        case Kind::Beta: return params[0] / (params[0] + params[1]);
        case Kind::Cauchy: throw DomainError("Cauchy has no mean", params[1]);
        case Kind::RaisedCosine: return params[0];
        case Kind::Normal: return params[0];
        case Kind::GaussMixture: {
            double m = 0.0;
            for (std::size_t c = 0; c * 3 + 2 < params.size(); ++c)
                m += params[c * 3] * params[c * 3 + 1];
            return m;
        }
    }
    throw ContractError("bad target kind");
}

double TargetDist::variance() const {
    switch (kind) {
        case Kind::Exponential: return 1.0 / (params[0] * params[0]);
        case Kind::FisherF: {
            double d1 = params[0], d2 = params[1];
            if (d2 <= 4.0) throw DomainError("F variance undefined", d2);
            double dm2 = d2 - 2.0;
            return 2.0 * d2 * d2 * (d1 + d2 - 2.0) / (d1 * dm2 * dm2 * (d2 - 4.0));
        }
        case Kind::Arcsine: return 0.125;
        case Kind::Beta: {
            double a = params[0], b = params[1];
            return a * b / ((a + b) * (a + b) * (a + b + 1.0));
        }
        case Kind::Cauchy: throw DomainError("Cauchy has no variance", params[1]);
        case Kind::RaisedCosine: {
            double s = params[1];
            return s * s * (1.0 / 3.0 - 2.0 / (M_PI * M_PI));
        }
        case Kind::Normal: return params[1] * params[1];
        case Kind::GaussMixture: {
            double m = mean(), v = 0.0;
            for (std::size_t c = 0; c * 3 + 2 < params.size(); ++c) {
                double w = params[c * 3], mc = params[c * 3 + 1], sc = params[c * 3 + 2];
                v += w * (sc * sc + (mc - m) * (mc - m));
            }
            return v;
        }
    }
    throw ContractError("bad target kind");
}

std::string TargetDist::spec_string() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::Exponential: os << "exponential"; break;
        case Kind::FisherF: os << "f"; break;
        case Kind::Arcsine: os << "arcsine"; break;
        case Kind::Beta: os << "beta"; break;
        case Kind::Cauchy: os << "cauchy"; break;
        case Kind::RaisedCosine: os << "cosine"; break;
        case Kind::Normal: os << "normal"; break;
        case Kind::GaussMixture: os << "mixture"; break;
    }
    for (std::size_t i = 0; i < params.size(); ++i) os << (i == 0 ? ':' : ',') << params[i];
    return os.str();
}

TargetDist TargetDist::parse(const std::string& spec) {
    auto [name, params] = split_spec(spec);
    TargetDist d;
    d.params = params;
    if (name == "exponential") {
        need_params(params, 1, name);
        d.kind = Kind::Exponential;
    } else if (name == "f") {
        need_params(params, 2, name);
        d.kind = Kind::FisherF;
    } else if (name == "arcsine") {
        if (!params.empty()) throw IoError("arcsine takes no parameters");
        d.kind = Kind::Arcsine;
    } else if (name == "beta") {
        need_params(params, 2, name);
        d.kind = Kind::Beta;
    } else if (name == "cauchy") {
        need_params(params, 2, name);
        d.kind = Kind::Cauchy;
    } else if (name == "cosine") {
        need_params(params, 2, name);
        d.kind = Kind::RaisedCosine;
    } else if (name == "normal") {
        need_params(params, 2, name);
        d.kind = Kind::Normal;
    } else if (name == "mixture") {
        if (params.size() < 6 || params.size() % 3 != 0)
            throw IoError("mixture: expected triples w,mean,sd per component");
        d.kind = Kind::GaussMixture;
    } else {
        throw IoError("unknown target distribution '" + name + "'");
    }
    return d;
}

std::array<double, 2> TargetDist2::sample(std::mt19937_64& rng) const {
    if (kind == Kind::Gaussian) {
        double m1 = params[0], m2 = params[1];
        double c11 = params[2], c12 = params[3], c22 = params[4];
        // Cholesky factor of the 2x2 covariance.
        double l11 = std::sqrt(c11);
        double l21 = c12 / l11;
        double l22 = std::sqrt(c22 - l21 * l21);
        std::normal_distribution<double> n(0.0, 1.0);
        double z1 = n(rng), z2 = n(rng);
        return {m1 + l11 * z1, m2 + l21 * z1 + l22 * z2};
    }
    // Dirichlet via normalized gamma draws; report the first two coordinates.
    double g[3], total = 0.0;
    for (int i = 0; i < 3; ++i) {
        std::gamma_distribution<double> d(params[static_cast<std::size_t>(i)], 1.0);
        g[i] = d(rng);
        total += g[i];
    }
    return {g[0] / total, g[1] / total};
}

std::array<double, 2> TargetDist2::mean() const {
    if (kind == Kind::Gaussian) return {params[0], params[1]};
    double a0 = params[0] + params[1] + params[2];
    return {params[0] / a0, params[1] / a0};
}

std::array<double, 3> TargetDist2::covariance() const {
    if (kind == Kind::Gaussian) return {params[2], params[3], params[4]};
    double a1 = params[0], a2 = params[1];
    double a0 = params[0] + params[1] + params[2];
    double denom = a0 * a0 * (a0 + 1.0);
    return {a1 * (a0 - a1) / denom, -a1 * a2 / denom, a2 * (a0 - a2) / denom};
}

std::string TargetDist2::spec_string() const {
    std::ostringstream os;
    os << (kind == Kind::Gaussian ? "gauss2d" : "dirichlet");
    for (std::size_t i = 0; i < params.size(); ++i) os << (i == 0 ? ':' : ',') << params[i];
    return os.str();
}

TargetDist2 TargetDist2::parse(const std::string& spec) {
    auto [name, params] = split_spec(spec);
    TargetDist2 d;
    d.params = params;
    if (name == "gauss2d") {
        need_params(params, 5, name);
        d.kind = Kind::Gaussian;
        if (!(params[2] > 0.0 && params[4] > 0.0 &&
              params[2] * params[4] - params[3] * params[3] > 0.0))
            throw IoError("gauss2d: covariance is not positive definite");
    } else if (name == "dirichlet") {
        need_params(params, 3, name);
        d.kind = Kind::Dirichlet;
    } else {
        throw IoError("unknown 2-d target '" + name + "'");
    }
    return d;
}

}  // namespace ana
