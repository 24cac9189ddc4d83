#include "gmplan/environment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gmplan {

SignedDistanceField::SignedDistanceField(int dims, Eigen::VectorXd origin, double cell_size,
                                         std::vector<int> counts, std::vector<double> values)
    : dims_(dims),
      origin_(std::move(origin)),
      cell_size_(cell_size),
      counts_(std::move(counts)),
      values_(std::move(values)) {
    if (dims_ != 2 && dims_ != 3) throw ConfigError("SignedDistanceField: dims must be 2 or 3");
    if (!(cell_size_ > 0.0)) throw ConfigError("SignedDistanceField: cell_size must be > 0");
    if (static_cast<int>(counts_.size()) != dims_ || origin_.size() != dims_)
        throw ConfigError("SignedDistanceField: origin/counts dimension mismatch");
    std::size_t expected = 1;
    for (int c : counts_) {
        if (c < 2) throw ConfigError("SignedDistanceField: need at least 2 cells per axis");
        expected *= static_cast<std::size_t>(c);
    }
    if (values_.size() != expected)
        throw ConfigError("SignedDistanceField: grid length does not match cell counts");
}

double SignedDistanceField::node(const std::vector<int>& idx) const {
    std::size_t flat = 0;
    std::size_t stride = 1;
    for (int d = 0; d < dims_; ++d) {
        flat += static_cast<std::size_t>(idx[d]) * stride;
        stride *= static_cast<std::size_t>(counts_[d]);
    }
    return values_[flat];
}

double SignedDistanceField::interpolate(const Eigen::VectorXd& p) const {
    if (values_.empty()) throw ConfigError("SignedDistanceField: empty grid");
    // cell coordinates, clamped to the grid support
    std::vector<int> base(dims_);
    std::vector<double> frac(dims_);
    for (int d = 0; d < dims_; ++d) {
        double u = (p(d) - origin_(d)) / cell_size_;
        u = std::clamp(u, 0.0, static_cast<double>(counts_[d] - 1));
        int i = std::min(static_cast<int>(std::floor(u)), counts_[d] - 2);
        base[d] = i;
        frac[d] = u - i;
    }
    // accumulate over the 2^dims cell corners
    double value = 0.0;
    const int corners = 1 << dims_;
    std::vector<int> idx(dims_);
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        for (int d = 0; d < dims_; ++d) {
            const int bit = (c >> d) & 1;
            idx[d] = base[d] + bit;
            w *= bit ? frac[d] : 1.0 - frac[d];
        }
        if (w != 0.0) value += w * node(idx);
    }
    return value;
}

double SignedDistanceField::distance(const Eigen::VectorXd& p) const {
    if (p.size() != dims_)
        throw std::invalid_argument("SignedDistanceField: query dimension mismatch");
    return interpolate(p);
}

std::pair<double, Eigen::VectorXd> SignedDistanceField::query(const Eigen::VectorXd& p) const {
    const double d0 = distance(p);
    Eigen::VectorXd grad(dims_);
    // step small enough to stay inside one cell, where the interpolant is
    // linear along each axis and the central difference is exact
    const double h = 1e-4 * cell_size_;
    for (int d = 0; d < dims_; ++d) {
        const double lo = origin_(d);
        const double hi = origin_(d) + cell_size_ * (counts_[d] - 1);
        double step_plus = std::min(h, hi - p(d));
        double step_minus = std::min(h, p(d) - lo);
        // outside the grid both clamp to zero; fall back to a nominal step
        if (step_plus <= 0.0 && step_minus <= 0.0) {
            grad(d) = 0.0;
            continue;
        }
        Eigen::VectorXd pp = p, pm = p;
        pp(d) += std::max(step_plus, 0.0);
        pm(d) -= std::max(step_minus, 0.0);
        grad(d) = (interpolate(pp) - interpolate(pm)) / (pp(d) - pm(d));
    }
    return {d0, grad};
}

void SignedDistanceField::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("SignedDistanceField::save: cannot open " + path);
    out << "sdf " << dims_ << "\n";
    out << "counts";
    for (int c : counts_) out << ' ' << c;
    out << "\norigin";
    out << std::setprecision(17);
    for (int d = 0; d < dims_; ++d) out << ' ' << origin_(d);
    out << "\ncell_size " << cell_size_ << "\n";
    for (std::size_t i = 0; i < values_.size(); ++i)
        out << values_[i] << ((i + 1) % 8 == 0 ? '\n' : ' ');
    out << "\n";
}

SignedDistanceField SignedDistanceField::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("SignedDistanceField::load: cannot open " + path);
    std::string tag;
    int dims = 0;
    in >> tag >> dims;
    if (tag != "sdf" || (dims != 2 && dims != 3))
        throw ConfigError("SignedDistanceField::load: bad header in " + path);
    std::vector<int> counts(dims);
    in >> tag;
    if (tag != "counts") throw ConfigError("SignedDistanceField::load: expected counts");
    for (int& c : counts) in >> c;
    Eigen::VectorXd origin(dims);
    in >> tag;
    if (tag != "origin") throw ConfigError("SignedDistanceField::load: expected origin");
    for (int d = 0; d < dims; ++d) in >> origin(d);
    double cell = 0.0;
    in >> tag >> cell;
    if (tag != "cell_size") throw ConfigError("SignedDistanceField::load: expected cell_size");
    std::size_t total = 1;
    for (int c : counts) total *= static_cast<std::size_t>(c);
    std::vector<double> values(total);
    for (std::size_t i = 0; i < total; ++i) {
        if (!(in >> values[i]))
            throw ConfigError("SignedDistanceField::load: truncated grid in " + path);
    }
    return SignedDistanceField(dims, origin, cell, counts, values);
}

double box_signed_distance(const Eigen::VectorXd& p, const std::vector<BoxObstacle>& boxes) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& box : boxes) {
        const Eigen::VectorXd q = (p - box.center).cwiseAbs() - box.half_extents;
        const double outside = q.cwiseMax(0.0).norm();
        const double inside = std::min(q.maxCoeff(), 0.0);
        best = std::min(best, outside + inside);
    }
    return best;
}

SignedDistanceField make_sdf(const std::vector<BoxObstacle>& boxes, int dims,
                             const Eigen::VectorXd& origin, double cell_size,
                             const std::vector<int>& counts) {
    std::size_t total = 1;
    for (int c : counts) total *= static_cast<std::size_t>(c);
    std::vector<double> values(total);
    std::vector<int> idx(dims, 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        Eigen::VectorXd p(dims);
        for (int d = 0; d < dims; ++d) p(d) = origin(d) + cell_size * idx[d];
        values[flat] = boxes.empty() ? 1e6 : box_signed_distance(p, boxes);
        for (int d = 0; d < dims; ++d) {
            if (++idx[d] < counts[d]) break;
            idx[d] = 0;
        }
    }
    return SignedDistanceField(dims, origin, cell_size, counts, values);
}

std::vector<BoxObstacle> load_obstacles(const std::string& path, int& dims) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_obstacles: cannot open " + path);
    std::string tag;
    in >> tag >> dims;
    if (tag != "boxes" || (dims != 2 && dims != 3))
        throw ConfigError("load_obstacles: bad header in " + path);
    std::vector<BoxObstacle> boxes;
    while (true) {
        BoxObstacle box;
        box.center.resize(dims);
        box.half_extents.resize(dims);
        for (int d = 0; d < dims; ++d)
            if (!(in >> box.center(d))) return boxes;
        for (int d = 0; d < dims; ++d)
            if (!(in >> box.half_extents(d)))
                throw ConfigError("load_obstacles: truncated box row in " + path);
        boxes.push_back(std::move(box));
    }
}

void save_obstacles(const std::string& path, const std::vector<BoxObstacle>& boxes, int dims) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_obstacles: cannot open " + path);
    out << "boxes " << dims << "\n" << std::setprecision(17);
    for (const auto& box : boxes) {
        for (int d = 0; d < dims; ++d) out << box.center(d) << ' ';
        for (int d = 0; d < dims; ++d) out << box.half_extents(d) << (d + 1 == dims ? '\n' : ' ');
    }
}

int RobotModel::num_checking_points() const {
    if (kind == RobotKind::PointRobot) return 1;
    return static_cast<int>(link_lengths.size()) * points_per_link;
}

std::vector<CheckPoint> forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q) {
    if (q.size() < model.dof)
        throw std::invalid_argument("forward_kinematics: configuration shorter than dof");

    std::vector<CheckPoint> points;
    if (model.kind == RobotKind::PointRobot) {
        CheckPoint cp;
        cp.position = q.head(model.dof);
        cp.radius = model.radius;
        cp.jacobian = Eigen::MatrixXd::Identity(model.dof, model.dof);
        points.push_back(std::move(cp));
        return points;
    }
    if (model.kind != RobotKind::PlanarArm)
        throw ConfigError("forward_kinematics: unknown robot kind");
    if (static_cast<int>(model.link_lengths.size()) != model.dof)
        throw ConfigError("forward_kinematics: planar arm needs one link length per dof");
    if (model.points_per_link < 1)
        throw ConfigError("forward_kinematics: need at least one checking point per link");

    // Cumulative joint angles; link i points along angle q_0 + ... + q_i.
    const int dof = model.dof;
    Eigen::VectorXd theta(dof);
    double acc = 0.0;
    for (int i = 0; i < dof; ++i) {
        acc += q(i);
        theta(i) = acc;
    }
    Eigen::Vector2d base = Eigen::Vector2d::Zero();
    points.reserve(model.num_checking_points());
    for (int link = 0; link < dof; ++link) {
        const double c = std::cos(theta(link));
        const double s = std::sin(theta(link));
        const Eigen::Vector2d dir(c, s);
        const double len = model.link_lengths[link];
        for (int k = 0; k < model.points_per_link; ++k) {
            // evenly spaced including both link endpoints
            const double frac = model.points_per_link == 1
                                    ? 1.0
                                    : static_cast<double>(k) / (model.points_per_link - 1);
            CheckPoint cp;
            cp.position = base + frac * len * dir;
            cp.radius = model.radius;
            cp.jacobian = Eigen::MatrixXd::Zero(2, dof);
            // d position / d q_j accumulates the perpendiculars of every
            // segment beyond joint j.
            for (int j = 0; j <= link; ++j) {
                Eigen::Vector2d perp_sum = Eigen::Vector2d::Zero();
                for (int m = j; m <= link; ++m) {
                    const double reach = (m == link) ? frac * len : model.link_lengths[m];
                    perp_sum += reach * Eigen::Vector2d(-std::sin(theta(m)), std::cos(theta(m)));
                }
                cp.jacobian.col(j) = perp_sum;
            }
            points.push_back(std::move(cp));
        }
        base += len * dir;
    }
    return points;
}

double hinge(double d, const CollisionParams& params, double radius) {
    return std::max(params.eps_margin + radius - d, 0.0);
}

double collision_cost(const RobotModel& model, const SignedDistanceField& field,
                      const CollisionParams& params, const Eigen::VectorXd& state) {
    double cost = 0.0;
    for (const auto& cp : forward_kinematics(model, state)) {
        const double h = hinge(field.distance(cp.position), params, cp.radius);
        cost += params.sigma_obs * h * h;
    }
    return cost;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> collision_grad(const RobotModel& model,
                                                           const SignedDistanceField& field,
                                                           const CollisionParams& params,
                                                           const Eigen::VectorXd& state) {
    const int n = static_cast<int>(state.size());
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(n, n);
    for (const auto& cp : forward_kinematics(model, state)) {
        auto [d, sdf_grad] = field.query(cp.position);
        const double h = hinge(d, params, cp.radius);
        if (h <= 0.0) continue;  // outside the hinge support, slope 0
        // dh/dstate = -grad(S)^T J_fk on the configuration block
        Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
        row.head(model.dof) = -(sdf_grad.transpose() * cp.jacobian).transpose();
        grad += 2.0 * params.sigma_obs * h * row;
        hessian += 2.0 * params.sigma_obs * row * row.transpose();
    }
    return {grad, hessian};
}

}  // namespace gmplan
