#include "gmplan/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gmplan {

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Eigen::VectorXd vec_from_json(const json& arr, const std::string& field) {
    if (!arr.is_array()) throw ConfigError("config field '" + field + "' must be an array");
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
    return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

/// Covariances accept a scalar (s * I, sized later) or a full matrix.
Eigen::MatrixXd cov_from_json(const json& entry, int dim, const std::string& field) {
    if (entry.is_number()) {
        return entry.get<double>() * Eigen::MatrixXd::Identity(dim, dim);
    }
    if (!entry.is_array()) throw ConfigError("config field '" + field + "' must be a scalar or matrix");
    Eigen::MatrixXd m(entry.size(), entry.size());
    for (std::size_t i = 0; i < entry.size(); ++i) {
        const json& row = entry[i];
        if (!row.is_array() || row.size() != entry.size())
            throw ConfigError("config field '" + field + "' must be square");
        for (std::size_t j = 0; j < row.size(); ++j) m(i, j) = row[j].get<double>();
    }
    return m;
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

}  // namespace

void ExperimentConfig::validate() const {
    const int n = state_dim();
    if (robot.dof < 1) throw ConfigError("robot.dof must be >= 1");
    if (robot.kind == RobotKind::PlanarArm) {
        if (static_cast<int>(robot.link_lengths.size()) != robot.dof)
            throw ConfigError("robot.links must list one length per dof");
        for (double l : robot.link_lengths)
            if (!(l > 0.0)) throw ConfigError("robot.links entries must be positive");
    }
    if (robot.radius < 0.0) throw ConfigError("robot.radius must be >= 0");
    if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
    if (support_states < 2) throw ConfigError("support_states must be >= 2");
    if (mu0.size() != n) throw ConfigError("boundary.mu0 has wrong dimension");
    if (muT.size() != n) throw ConfigError("boundary.muT has wrong dimension");
    if (K0.rows() != n || K0.cols() != n) throw ConfigError("boundary.K0 has wrong dimension");
    if (KT.rows() != n || KT.cols() != n) throw ConfigError("boundary.KT has wrong dimension");
    Eigen::LLT<Eigen::MatrixXd> llt0(K0);
    if (llt0.info() != Eigen::Success) throw ConfigError("boundary.K0 is not positive definite");
    Eigen::LLT<Eigen::MatrixXd> lltT(KT);
    if (lltT.info() != Eigen::Success) throw ConfigError("boundary.KT is not positive definite");
    if (!(collision.eps_margin >= 0.0)) throw ConfigError("collision.eps_margin must be >= 0");
    if (!(collision.sigma_obs > 0.0)) throw ConfigError("collision.sigma_obs must be > 0");

    const int ws = robot.workspace_dims();
    if (environment.sdf_file.empty()) {
        if (static_cast<int>(environment.grid_counts.size()) != ws)
            throw ConfigError("environment.grid_counts must match the workspace dimension");
        if (environment.grid_origin.size() != ws)
            throw ConfigError("environment.origin must match the workspace dimension");
        if (!(environment.cell_size > 0.0)) throw ConfigError("environment.cell_size must be > 0");
        for (const auto& box : environment.boxes)
            if (box.center.size() != ws || box.half_extents.size() != ws)
                throw ConfigError("environment.boxes entries must match the workspace dimension");
    } else if (!std::filesystem::exists(environment.sdf_file)) {
        throw ConfigError("environment.sdf_file does not exist: " + environment.sdf_file);
    }

    if (solver == SolverKind::GVI) {
        try {
            gvi.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("gvi: ") + e.what());
        }
    } else {
        try {
            pgcs.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("pgcs: ") + e.what());
        }
    }
    if (sample_count < 0) throw ConfigError("samples must be >= 0");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["solver"] = c.solver == SolverKind::GVI ? "gvi" : "pgcs";

    json robot;
    robot["kind"] = c.robot.kind == RobotKind::PointRobot ? "point_robot" : "planar_arm";
    robot["dof"] = c.robot.dof;
    robot["radius"] = c.robot.radius;
    if (c.robot.kind == RobotKind::PlanarArm) {
        robot["links"] = c.robot.link_lengths;
        robot["points_per_link"] = c.robot.points_per_link;
    }
    j["robot"] = robot;

    j["horizon"] = c.horizon;
    j["support_states"] = c.support_states;

    json boundary;
    boundary["mu0"] = vec_to_json(c.mu0);
    boundary["muT"] = vec_to_json(c.muT);
    boundary["K0"] = mat_to_json(c.K0);
    boundary["KT"] = mat_to_json(c.KT);
    j["boundary"] = boundary;

    json env;
    if (!c.environment.sdf_file.empty()) {
        env["sdf_file"] = c.environment.sdf_file;
    } else {
        json boxes = json::array();
        for (const auto& b : c.environment.boxes) {
            json box;
            box["center"] = vec_to_json(b.center);
            box["half_extents"] = vec_to_json(b.half_extents);
            boxes.push_back(box);
        }
        env["boxes"] = boxes;
        env["origin"] = vec_to_json(c.environment.grid_origin);
        env["cell_size"] = c.environment.cell_size;
        env["counts"] = c.environment.grid_counts;
    }
    j["environment"] = env;

    json collision;
    collision["eps_margin"] = c.collision.eps_margin;
    collision["sigma_obs"] = c.collision.sigma_obs;
    j["collision"] = collision;

    if (c.solver == SolverKind::GVI) {
        json g;
        g["step_size"] = c.gvi.step_size;
        g["max_backtracks"] = c.gvi.max_backtracks;
        g["temp_low"] = c.gvi.temp_low;
        g["temp_high"] = c.gvi.temp_high;
        g["low_temp_iterations"] = c.gvi.low_temp_iterations;
        g["iterations"] = c.gvi.iterations;
        g["gh_degree"] = c.gvi.gh_degree;
        g["tolerance"] = c.gvi.tolerance;
        j["gvi"] = g;
    } else {
        json p;
        p["iterations"] = c.pgcs.iterations;
        p["epsilon"] = c.pgcs.epsilon;
        p["step_size"] = c.pgcs.step_size;
        p["backtrack_ratio"] = c.pgcs.backtrack_ratio;
        p["max_backtracks"] = c.pgcs.max_backtracks;
        p["tolerance"] = c.pgcs.tolerance;
        p["substeps"] = c.pgcs.substeps;
        j["pgcs"] = p;
    }

    j["seed"] = c.seed;
    j["samples"] = c.sample_count;
    j["output_dir"] = c.output_dir;
    return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    try {
        c.name = get_or<std::string>(j, "name", "experiment");
        const std::string solver = j.at("solver").get<std::string>();
        if (solver == "gvi")
            c.solver = SolverKind::GVI;
        else if (solver == "pgcs")
            c.solver = SolverKind::PGCS;
        else
            throw ConfigError("solver must be 'gvi' or 'pgcs'");

        const json& robot = j.at("robot");
        const std::string kind = robot.at("kind").get<std::string>();
        if (kind == "point_robot")
            c.robot.kind = RobotKind::PointRobot;
        else if (kind == "planar_arm")
            c.robot.kind = RobotKind::PlanarArm;
        else
            throw ConfigError("robot.kind must be 'point_robot' or 'planar_arm'");
        c.robot.dof = robot.at("dof").get<int>();
        c.robot.radius = get_or<double>(robot, "radius", 0.5);
        if (c.robot.kind == RobotKind::PlanarArm) {
            c.robot.link_lengths = robot.at("links").get<std::vector<double>>();
            c.robot.points_per_link = get_or<int>(robot, "points_per_link", 3);
        }

        c.horizon = j.at("horizon").get<double>();
        c.support_states = j.at("support_states").get<int>();

        const json& boundary = j.at("boundary");
        c.mu0 = vec_from_json(boundary.at("mu0"), "boundary.mu0");
        c.muT = vec_from_json(boundary.at("muT"), "boundary.muT");
        c.K0 = cov_from_json(boundary.at("K0"), c.state_dim(), "boundary.K0");
        c.KT = cov_from_json(boundary.at("KT"), c.state_dim(), "boundary.KT");

        const json& env = j.at("environment");
        if (env.contains("sdf_file")) {
            c.environment.sdf_file = env.at("sdf_file").get<std::string>();
        } else {
            for (const json& box_json : env.at("boxes")) {
                BoxObstacle box;
                box.center = vec_from_json(box_json.at("center"), "environment.boxes.center");
                box.half_extents =
                    vec_from_json(box_json.at("half_extents"), "environment.boxes.half_extents");
                c.environment.boxes.push_back(std::move(box));
            }
            c.environment.grid_origin = vec_from_json(env.at("origin"), "environment.origin");
            c.environment.cell_size = env.at("cell_size").get<double>();
            c.environment.grid_counts = env.at("counts").get<std::vector<int>>();
        }

        if (j.contains("collision")) {
            c.collision.eps_margin = get_or<double>(j["collision"], "eps_margin", 0.5);
            c.collision.sigma_obs = get_or<double>(j["collision"], "sigma_obs", 1.0);
        }

        if (j.contains("gvi")) {
            const json& g = j["gvi"];
            c.gvi.step_size = get_or<double>(g, "step_size", c.gvi.step_size);
            c.gvi.max_backtracks = get_or<int>(g, "max_backtracks", c.gvi.max_backtracks);
            c.gvi.temp_low = get_or<double>(g, "temp_low", c.gvi.temp_low);
            c.gvi.temp_high = get_or<double>(g, "temp_high", c.gvi.temp_high);
            c.gvi.low_temp_iterations =
                get_or<int>(g, "low_temp_iterations", c.gvi.low_temp_iterations);
            c.gvi.iterations = get_or<int>(g, "iterations", c.gvi.iterations);
            c.gvi.gh_degree = get_or<int>(g, "gh_degree", c.gvi.gh_degree);
            c.gvi.tolerance = get_or<double>(g, "tolerance", c.gvi.tolerance);
        }
        if (j.contains("pgcs")) {
            const json& p = j["pgcs"];
            c.pgcs.iterations = get_or<int>(p, "iterations", c.pgcs.iterations);
            c.pgcs.epsilon = get_or<double>(p, "epsilon", c.pgcs.epsilon);
            c.pgcs.step_size = get_or<double>(p, "step_size", c.pgcs.step_size);
            c.pgcs.backtrack_ratio = get_or<double>(p, "backtrack_ratio", c.pgcs.backtrack_ratio);
            c.pgcs.max_backtracks = get_or<int>(p, "max_backtracks", c.pgcs.max_backtracks);
            c.pgcs.tolerance = get_or<double>(p, "tolerance", c.pgcs.tolerance);
            c.pgcs.substeps = get_or<int>(p, "substeps", c.pgcs.substeps);
        }
        c.pgcs.nodes = c.support_states;

        c.seed = get_or<std::uint64_t>(j, "seed", 0);
        c.sample_count = get_or<int>(j, "samples", 100);
        c.output_dir = get_or<std::string>(j, "output_dir", "out/" + c.name);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return config_from_json(buffer.str());
}

void save_config(const ExperimentConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file " + path);
    out << config_to_json(config) << "\n";
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    const std::string text = config_to_json(config);
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 1099511628211ull;
    }
    return hash;
}

SignedDistanceField build_environment(const ExperimentConfig& config) {
    if (!config.environment.sdf_file.empty())
        return SignedDistanceField::load(config.environment.sdf_file);
    return make_sdf(config.environment.boxes, config.robot.workspace_dims(),
                    config.environment.grid_origin, config.environment.cell_size,
                    config.environment.grid_counts);
}

}  // namespace gmplan
