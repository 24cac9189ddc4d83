#include <cstdio>
#include <cstdlib>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "gmplan/config.hpp"
#include "gmplan/runner.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

std::string output_root() {
    const char* root = std::getenv("PLAN_OUTPUT_ROOT");
    return root ? root : "";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gauss-Markov motion planning under uncertainty"};
    app.require_subcommand(1);

    std::string config_path, result_dir, obstacles_path, out_path, dir;
    int sample_n = 100;
    std::uint64_t seed = 0;
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    bool simulate = false;
    double cell_size = 0.5;
    std::vector<double> origin;
    std::vector<int> counts;

    auto* run_cmd = app.add_subcommand("run", "run one experiment config");
    run_cmd->add_option("config", config_path, "experiment config (JSON)")->required();

    auto* batch_cmd = app.add_subcommand("batch", "run every config in a directory");
    batch_cmd->add_option("dir", dir, "directory of *.json configs")->required();
    batch_cmd->add_option("--workers", workers, "worker threads");

    auto* sample_cmd = app.add_subcommand("sample", "draw trajectories from a result");
    sample_cmd->add_option("result", result_dir, "result directory")->required();
    sample_cmd->add_option("--n", sample_n, "number of samples");
    sample_cmd->add_option("--seed", seed, "RNG seed");
    sample_cmd->add_flag("--sde", simulate, "simulate the closed-loop SDE (PGCS only)");

    auto* plot_cmd = app.add_subcommand("plotdata", "emit 3-sigma contour data");
    plot_cmd->add_option("result", result_dir, "result directory")->required();

    auto* sdf_cmd = app.add_subcommand("sdfgen", "rasterize an obstacle list into an SDF");
    sdf_cmd->add_option("obstacles", obstacles_path, "obstacle list file")->required();
    sdf_cmd->add_option("out", out_path, "output SDF file")->required();
    sdf_cmd->add_option("--cell-size", cell_size, "grid resolution");
    sdf_cmd->add_option("--origin", origin, "grid origin (one value per axis)");
    sdf_cmd->add_option("--counts", counts, "grid node counts (one per axis)");

    auto* dump_cmd = app.add_subcommand("dump", "parse a config and write its canonical form");
    dump_cmd->add_option("config", config_path, "experiment config (JSON)")->required();
    dump_cmd->add_option("out", out_path, "output path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            const auto config = gmplan::load_config(config_path);
            config.validate();
            const auto result = gmplan::run(config, output_root());
            if (result.solver_failed) {
                std::fprintf(stderr, "solver failed: %s\n", result.failure_reason.c_str());
                return kExitSolver;
            }
            std::printf("%s: wrote %s (mean collision cost %.6g)\n", config.name.c_str(),
                        config.output_dir.c_str(), result.final_mean_collision);
        } else if (*batch_cmd) {
            const int failures = gmplan::run_batch(dir, output_root(), workers);
            if (failures > 0) return kExitSolver;
        } else if (*sample_cmd) {
            const auto result = gmplan::load_result(result_dir);
            const auto mode = simulate ? gmplan::PGCSSampleMode::SimulateSDE
                                       : gmplan::PGCSSampleMode::KnotMarginals;
            const auto samples = gmplan::sample_trajectories(result, sample_n, seed, mode);
            gmplan::write_samples_csv(result_dir + "/samples.csv", samples,
                                      result.config.state_dim());
            std::printf("wrote %zu samples to %s/samples.csv\n", samples.size(),
                        result_dir.c_str());
        } else if (*plot_cmd) {
            const auto result = gmplan::load_result(result_dir);
            gmplan::emit_plot_data(result, result_dir);
            std::printf("wrote contour data to %s\n", result_dir.c_str());
        } else if (*sdf_cmd) {
            int dims = 0;
            const auto boxes = gmplan::load_obstacles(obstacles_path, dims);
            if (origin.empty() || counts.empty()) {
                std::fprintf(stderr, "sdfgen: --origin and --counts are required\n");
                return kExitValidation;
            }
            if (static_cast<int>(origin.size()) != dims ||
                static_cast<int>(counts.size()) != dims) {
                std::fprintf(stderr, "sdfgen: origin/counts must have %d entries\n", dims);
                return kExitValidation;
            }
            Eigen::VectorXd origin_vec(dims);
            for (int i = 0; i < dims; ++i) origin_vec(i) = origin[i];
            const auto sdf = gmplan::make_sdf(boxes, dims, origin_vec, cell_size, counts);
            sdf.save(out_path);
            std::printf("wrote %s\n", out_path.c_str());
        } else if (*dump_cmd) {
            const auto config = gmplan::load_config(config_path);
            config.validate();
            gmplan::save_config(config, out_path);
        }
    } catch (const gmplan::ConfigError& e) {
        std::fprintf(stderr, "invalid configuration: %s\n", e.what());
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid configuration: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return kExitSolver;
    }
    return 0;
}
