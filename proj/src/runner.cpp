#include "gmplan/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace gmplan {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Fixed 17-significant-digit formatting so identical runs produce
/// byte-identical files.
std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_means_csv(const std::string& path, const Eigen::VectorXd& times,
                     const std::vector<Eigen::VectorXd>& means) {
    std::ofstream out(path);
    const int n = means.empty() ? 0 : static_cast<int>(means.front().size());
    out << "knot,t";
    for (int k = 0; k < n; ++k) out << ",x" << k;
    out << "\n";
    for (std::size_t i = 0; i < means.size(); ++i) {
        out << i << ',' << fmt(times(static_cast<int>(i)));
        for (int k = 0; k < n; ++k) out << ',' << fmt(means[i](k));
        out << "\n";
    }
}

void write_covs_csv(const std::string& path, const Eigen::VectorXd& times,
                    const std::vector<Eigen::MatrixXd>& covs) {
    std::ofstream out(path);
    const int n = covs.empty() ? 0 : static_cast<int>(covs.front().rows());
    out << "knot,t";
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out << ",c" << i << j;
    out << "\n";
    for (std::size_t k = 0; k < covs.size(); ++k) {
        out << k << ',' << fmt(times(static_cast<int>(k)));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out << ',' << fmt(covs[k](i, j));
        out << "\n";
    }
}

json vec_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

json mat_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Eigen::VectorXd vec_from(const json& arr) {
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
    return v;
}

Eigen::MatrixXd mat_from(const json& rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
    return m;
}

double mean_hinge_cost(const CollisionEnv& env, const std::vector<Eigen::VectorXd>& means) {
    double total = 0.0;
    for (const auto& state : means)
        total += collision_cost(env.robot, env.sdf, env.params, state);
    return total;
}

CollisionEnv make_env(const ExperimentConfig& config) {
    CollisionEnv env;
    env.robot = config.robot;
    env.params = config.collision;
    env.sdf = build_environment(config);
    return env;
}

}  // namespace

ResultBundle run(const ExperimentConfig& config, const std::string& output_root) {
    config.validate();
    ResultBundle result;
    result.config = config;
    result.hash = config_hash(config);

    const CollisionEnv env = make_env(config);
    const LTVSystem sys = constant_velocity_system(config.robot.dof);
    const int d = config.state_dim();

    const auto start = std::chrono::steady_clock::now();
    if (config.solver == SolverKind::GVI) {
        const TimeGrid grid = TimeGrid::uniform(0.0, config.horizon, config.support_states);
        BoundaryConditions boundary{config.mu0, config.K0, config.muT, config.KT};
        const GaussMarkovPrior prior = build_prior(sys, grid, boundary);
        GVISolver solver(prior, env, config.gvi);
        GVISolver::Result sol = solver.solve();

        result.knot_times = grid.knots;
        BlockTridiagLLT llt;
        if (!llt.compute(sol.distribution.precision))
            throw SolverError("run: final GVI precision is not positive definite");
        const auto marg = llt.marginals();
        for (int i = 0; i < grid.num_states(); ++i) {
            result.knot_means.push_back(sol.distribution.mean.segment(i * d, d));
            result.knot_covs.push_back(marg.diag[i]);
        }
        result.gvi_history = std::move(sol.history);
        result.gvi_distribution = std::move(sol.distribution);
    } else {
        LTVSystem noisy = sys;
        noisy.epsilon = config.pgcs.epsilon;
        PGCSBoundary boundary{config.horizon, config.mu0, config.muT, config.K0, config.KT};
        PGCSConfig pgcs_cfg = config.pgcs;
        pgcs_cfg.nodes = config.support_states;
        PGCSResult sol = pgcs_solve(noisy, boundary, env, pgcs_cfg);

        result.knot_times = sol.solution.times;
        result.knot_means = sol.solution.nominal_mean;
        result.knot_covs = sol.solution.nominal_cov;
        result.pgcs_gains = sol.solution.gains;
        for (const auto& it : sol.history) {
            result.pgcs_cost_history.push_back(it.cost);
            result.pgcs_step_history.push_back(it.step_size);
        }
        result.solver_failed = sol.failed;
        result.failure_reason = sol.failure_reason;
    }
    result.solve_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    result.final_mean_collision = mean_hinge_cost(env, result.knot_means);
    result.samples = sample_trajectories(result, config.sample_count, config.seed);

    // ---- write the bundle ----
    fs::path dir = config.output_dir;
    if (!output_root.empty()) dir = fs::path(output_root) / config.output_dir;
    fs::create_directories(dir);

    write_means_csv((dir / "means.csv").string(), result.knot_times, result.knot_means);
    write_covs_csv((dir / "covariances.csv").string(), result.knot_times, result.knot_covs);

    {
        std::ofstream out(dir / "costs.csv");
        if (config.solver == SolverKind::GVI) {
            out << "iter,prior,collision,mp,entropy,total\n";
            for (std::size_t i = 0; i < result.gvi_history.size(); ++i) {
                const CostReport& r = result.gvi_history[i];
                out << i << ',' << fmt(r.prior) << ',' << fmt(r.collision) << ',' << fmt(r.mp)
                    << ',' << fmt(r.entropy) << ',' << fmt(r.total) << "\n";
            }
        } else {
            out << "iter,cost,step_size\n";
            for (std::size_t i = 0; i < result.pgcs_cost_history.size(); ++i)
                out << i << ',' << fmt(result.pgcs_cost_history[i]) << ','
                    << fmt(result.pgcs_step_history[i]) << "\n";
        }
    }

    write_samples_csv((dir / "samples.csv").string(), result.samples, d);

    {
        json dist;
        dist["solver"] = config.solver == SolverKind::GVI ? "gvi" : "pgcs";
        dist["state_dim"] = d;
        dist["dof"] = config.robot.dof;
        dist["times"] = vec_json(result.knot_times);
        json means = json::array();
        for (const auto& m : result.knot_means) means.push_back(vec_json(m));
        dist["knot_means"] = means;
        json covs = json::array();
        for (const auto& c : result.knot_covs) covs.push_back(mat_json(c));
        dist["knot_covs"] = covs;
        if (config.solver == SolverKind::GVI) {
            dist["mean"] = vec_json(result.gvi_distribution.mean);
            json diag = json::array();
            json lower = json::array();
            const BlockTridiag& prec = result.gvi_distribution.precision;
            for (int i = 0; i < prec.num_blocks(); ++i) diag.push_back(mat_json(prec.diag(i)));
            for (int i = 0; i + 1 < prec.num_blocks(); ++i)
                lower.push_back(mat_json(prec.lower(i)));
            dist["precision_diag"] = diag;
            dist["precision_lower"] = lower;
        } else {
            dist["epsilon"] = config.pgcs.epsilon;
            json gains = json::array();
            json feedforward = json::array();
            for (const auto& k : result.pgcs_gains.gain) gains.push_back(mat_json(k));
            for (const auto& v : result.pgcs_gains.feedforward)
                feedforward.push_back(vec_json(v));
            dist["gain"] = gains;
            dist["feedforward"] = feedforward;
        }
        std::ofstream out(dir / "distribution.json");
        out << dist.dump(2) << "\n";
    }

    {
        json summary;
        summary["name"] = config.name;
        summary["solver"] = config.solver == SolverKind::GVI ? "gvi" : "pgcs";
        summary["config_hash"] = result.hash;
        summary["seed"] = config.seed;
        summary["final_mean_collision_cost"] = result.final_mean_collision;
        summary["solve_ms"] = result.solve_ms;
        summary["iterations"] = config.solver == SolverKind::GVI
                                    ? result.gvi_history.size()
                                    : result.pgcs_cost_history.size();
        summary["solver_failed"] = result.solver_failed;
        if (result.solver_failed) summary["failure_reason"] = result.failure_reason;
        json terminal = json::array();
        if (!result.knot_covs.empty())
            for (int i = 0; i < d; ++i) terminal.push_back(result.knot_covs.back()(i, i));
        summary["terminal_cov_diag"] = terminal;
        std::ofstream out(dir / "summary.json");
        out << summary.dump(2) << "\n";
    }

    save_config(config, (dir / "config.json").string());
    return result;
}

ResultBundle load_result(const std::string& result_dir) {
    const fs::path dir = result_dir;
    ResultBundle result;
    result.config = load_config((dir / "config.json").string());
    result.hash = config_hash(result.config);

    std::ifstream in(dir / "distribution.json");
    if (!in) throw ConfigError("load_result: missing distribution.json in " + result_dir);
    json dist = json::parse(in);
    result.knot_times = vec_from(dist.at("times"));
    for (const auto& m : dist.at("knot_means")) result.knot_means.push_back(vec_from(m));
    for (const auto& c : dist.at("knot_covs")) result.knot_covs.push_back(mat_from(c));
    const int d = dist.at("state_dim").get<int>();
    if (dist.at("solver") == "gvi") {
        result.gvi_distribution.mean = vec_from(dist.at("mean"));
        const auto& diag = dist.at("precision_diag");
        result.gvi_distribution.precision = BlockTridiag(static_cast<int>(diag.size()), d);
        for (std::size_t i = 0; i < diag.size(); ++i)
            result.gvi_distribution.precision.diag(static_cast<int>(i)) = mat_from(diag[i]);
        const auto& lower = dist.at("precision_lower");
        for (std::size_t i = 0; i < lower.size(); ++i)
            result.gvi_distribution.precision.lower(static_cast<int>(i)) = mat_from(lower[i]);
    } else {
        result.pgcs_gains.times = result.knot_times;
        for (const auto& k : dist.at("gain")) result.pgcs_gains.gain.push_back(mat_from(k));
        for (const auto& v : dist.at("feedforward"))
            result.pgcs_gains.feedforward.push_back(vec_from(v));
    }
    return result;
}

std::vector<Eigen::VectorXd> sample_trajectories(const ResultBundle& result, int n,
                                                 std::uint64_t seed, PGCSSampleMode mode) {
    std::vector<Eigen::VectorXd> samples;
    if (n <= 0) return samples;
    samples.reserve(n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const int d = result.config.state_dim();
    const int knots = static_cast<int>(result.knot_means.size());

    if (result.config.solver == SolverKind::GVI) {
        BlockTridiagLLT llt;
        if (!llt.compute(result.gvi_distribution.precision))
            throw FactorizationError("sample_trajectories: precision not positive definite");
        const int dim = static_cast<int>(result.gvi_distribution.mean.size());
        for (int s = 0; s < n; ++s) {
            Eigen::VectorXd z(dim);
            for (int i = 0; i < dim; ++i) z(i) = gauss(rng);
            samples.push_back(result.gvi_distribution.mean + llt.solve_lt(z));
        }
        return samples;
    }

    if (mode == PGCSSampleMode::KnotMarginals) {
        std::vector<Eigen::MatrixXd> sqrts(knots);
        for (int k = 0; k < knots; ++k) {
            Eigen::LLT<Eigen::MatrixXd> llt(result.knot_covs[k]);
            if (llt.info() != Eigen::Success)
                throw FactorizationError("sample_trajectories: knot covariance not PD");
            sqrts[k] = llt.matrixL();
        }
        for (int s = 0; s < n; ++s) {
            Eigen::VectorXd joint(knots * d);
            for (int k = 0; k < knots; ++k) {
                Eigen::VectorXd z(d);
                for (int i = 0; i < d; ++i) z(i) = gauss(rng);
                joint.segment(k * d, d) = result.knot_means[k] + sqrts[k] * z;
            }
            samples.push_back(std::move(joint));
        }
        return samples;
    }

    // Euler-Maruyama simulation of the closed-loop SDE at sub-knot resolution
    const LTVSystem base = constant_velocity_system(result.config.robot.dof);
    const double eps = result.config.pgcs.epsilon;
    const int substeps = result.config.pgcs.substeps;
    Eigen::LLT<Eigen::MatrixXd> llt0(result.config.K0);
    if (llt0.info() != Eigen::Success)
        throw FactorizationError("sample_trajectories: K0 not positive definite");
    const Eigen::MatrixXd sqrt0 = llt0.matrixL();
    const int dof = result.config.robot.dof;

    for (int s = 0; s < n; ++s) {
        Eigen::VectorXd z0(d);
        for (int i = 0; i < d; ++i) z0(i) = gauss(rng);
        Eigen::VectorXd x = result.config.mu0 + sqrt0 * z0;
        Eigen::VectorXd joint(knots * d);
        joint.head(d) = x;
        for (int k = 1; k < knots; ++k) {
            const double t0 = result.knot_times(k - 1);
            const double t1 = result.knot_times(k);
            const double h = (t1 - t0) / substeps;
            for (int step = 0; step < substeps; ++step) {
                const double t = t0 + step * h;
                const auto [gain, feedforward] = result.pgcs_gains.at(t);
                const Eigen::MatrixXd b_t = base.B(t);
                Eigen::VectorXd noise(dof);
                for (int i = 0; i < dof; ++i) noise(i) = gauss(rng);
                x += h * (base.A(t) * x + base.a(t) + b_t * (gain * x + feedforward)) +
                     std::sqrt(eps * h) * (b_t * noise);
            }
            joint.segment(k * d, d) = x;
        }
        samples.push_back(std::move(joint));
    }
    return samples;
}

void write_samples_csv(const std::string& path, const std::vector<Eigen::VectorXd>& samples,
                       int state_dim) {
    std::ofstream out(path);
    out << "sample,knot";
    for (int k = 0; k < state_dim; ++k) out << ",x" << k;
    out << "\n";
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const int knots = static_cast<int>(samples[s].size()) / state_dim;
        for (int k = 0; k < knots; ++k) {
            out << s << ',' << k;
            for (int i = 0; i < state_dim; ++i) out << ',' << fmt(samples[s](k * state_dim + i));
            out << "\n";
        }
    }
}

void emit_plot_data(const ResultBundle& result, const std::string& out_dir) {
    const fs::path dir = out_dir;
    fs::create_directories(dir);
    const int dof = result.config.robot.dof;
    const int ws = result.config.robot.workspace_dims();

    if (ws == 2) {
        std::ofstream out(dir / "ellipses.csv");
        out << "knot,t,idx,x,y\n";
        for (std::size_t k = 0; k < result.knot_means.size(); ++k) {
            const Eigen::Matrix2d cov = result.knot_covs[k].topLeftCorner(2, 2);
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
            const Eigen::Vector2d scale = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
            const Eigen::Vector2d center = result.knot_means[k].head(2);
            for (int i = 0; i < 64; ++i) {
                const double angle = 2.0 * M_PI * i / 64;
                const Eigen::Vector2d unit(std::cos(angle), std::sin(angle));
                const Eigen::Vector2d p =
                    center + 3.0 * es.eigenvectors() * (scale.asDiagonal() * unit);
                out << k << ',' << fmt(result.knot_times(static_cast<int>(k))) << ',' << i << ','
                    << fmt(p.x()) << ',' << fmt(p.y()) << "\n";
            }
        }
    } else {
        std::ofstream out(dir / "ellipsoids.csv");
        out << "knot,t,s0,s1,s2,qw,qx,qy,qz\n";
        for (std::size_t k = 0; k < result.knot_means.size(); ++k) {
            const Eigen::Matrix3d cov = result.knot_covs[k].topLeftCorner(3, 3);
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
            Eigen::Matrix3d axes = es.eigenvectors();
            if (axes.determinant() < 0.0) axes.col(0) *= -1.0;  // right-handed frame
            const Eigen::Vector3d scale = 3.0 * es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
            const Eigen::Quaterniond quat(axes);
            out << k << ',' << fmt(result.knot_times(static_cast<int>(k))) << ','
                << fmt(scale(0)) << ',' << fmt(scale(1)) << ',' << fmt(scale(2)) << ','
                << fmt(quat.w()) << ',' << fmt(quat.x()) << ',' << fmt(quat.y()) << ','
                << fmt(quat.z()) << "\n";
        }
    }
    (void)dof;
}

int run_batch(const std::string& config_dir, const std::string& output_root, int workers) {
    std::vector<std::string> configs;
    for (const auto& entry : fs::directory_iterator(config_dir))
        if (entry.path().extension() == ".json") configs.push_back(entry.path().string());
    std::sort(configs.begin(), configs.end());

    std::atomic<int> next{0};
    std::atomic<int> failures{0};
    auto worker = [&] {
        while (true) {
            const int idx = next.fetch_add(1);
            if (idx >= static_cast<int>(configs.size())) return;
            try {
                run(load_config(configs[idx]), output_root);
            } catch (const std::exception& e) {
                std::fprintf(stderr, "batch: %s failed: %s\n", configs[idx].c_str(), e.what());
                failures.fetch_add(1);
            }
        }
    };
    std::vector<std::thread> pool;
    const int count = std::max(1, workers);
    for (int i = 0; i < count; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return failures.load();
}

}  // namespace gmplan
