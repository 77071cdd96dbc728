#include "fsd/perception/cone_solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <unsupported/Eigen/AutoDiff>

#include "fsd/core/error.hpp"

namespace fsd::perception {

namespace {

using Ad = Eigen::AutoDiffScalar<Vec3>;

struct Problem {
  const ConeDetection& det;
  const ConeModel& model;
  const CameraModel& cam;
  double depth;
  const SolverOptions& opts;
  std::vector<Mat2> whiten;

  Problem(const ConeDetection& d, const ConeModel& m, const CameraModel& c, double dep, const SolverOptions& o)
      : det(d), model(m), cam(c), depth(dep), opts(o) {
    if (det.keypoints.size() != model.keypoints.size() || det.keypoint_cov.size() != det.keypoints.size()) {
      throw std::invalid_argument("cone solver: keypoints do not match the cone model");
    }
    whiten.reserve(det.keypoint_cov.size());
    for (const Mat2& cov : det.keypoint_cov) {
      Eigen::LLT<Mat2> llt(cov);
      if (llt.info() != Eigen::Success) throw std::invalid_argument("cone solver: keypoint covariance not PD");
      whiten.push_back(llt.matrixL().solve(Mat2::Identity()));
    }
  }

  [[nodiscard]] bool has_depth() const { return std::isfinite(depth); }
  [[nodiscard]] int size() const {
    return static_cast<int>(2 * det.keypoints.size()) + (has_depth() ? 1 : 0) + 1;
  }

  template <typename T>
  void residuals(const Eigen::Matrix<T, 3, 1>& p, Eigen::Matrix<T, Eigen::Dynamic, 1>& r) const {
    using std::sqrt;
    r.resize(size());
    const T planar = sqrt(p[0] * p[0] + p[1] * p[1]);
    const T nx = -p[1] / planar;
    const T ny = p[0] / planar;
    for (std::size_t i = 0; i < det.keypoints.size(); ++i) {
      const Vec2& k = model.keypoints[i];
      Eigen::Matrix<T, 3, 1> q;
      q << p[0] + T(k.x()) * nx, p[1] + T(k.x()) * ny, p[2] + T(k.y());
      const Eigen::Matrix<T, 2, 1> e = cam.project(q) - det.keypoints[i].cast<T>();
      const Eigen::Matrix<T, 2, 1> w = whiten[i].cast<T>() * e;
      r[2 * i] = w[0];
      r[2 * i + 1] = w[1];
    }
    int idx = static_cast<int>(2 * det.keypoints.size());
    if (has_depth()) r[idx++] = T(std::sqrt(opts.lambda1)) * (p[0] - T(depth)) / p[0];
    r[idx] = T(std::sqrt(opts.lambda2)) * p[2] / planar;
  }

  Eigen::VectorXd eval(const Vec3& p, Eigen::MatrixXd* jac) const {
    if (jac == nullptr) {
      Eigen::VectorXd r;
      residuals<double>(p, r);
      return r;
    }
    Eigen::Matrix<Ad, 3, 1> pa;
    for (int i = 0; i < 3; ++i) pa[i] = Ad(p[i], 3, i);
    Eigen::Matrix<Ad, Eigen::Dynamic, 1> ra;
    residuals<Ad>(pa, ra);
    Eigen::VectorXd r(ra.size());
    jac->resize(ra.size(), 3);
    for (int i = 0; i < ra.size(); ++i) {
      r[i] = ra[i].value();
      jac->row(i) = ra[i].derivatives().transpose();
    }
    return r;
  }
};

Vec3 initial_guess(const ConeDetection& det, const ConeModel& model, const CameraModel& cam, double depth) {
  double u_mean = 0.0;
  double v_min = std::numeric_limits<double>::infinity();
  double v_max = -v_min;
  for (const Vec2& k : det.keypoints) {
    u_mean += k.x();
    v_min = std::min(v_min, k.y());
    v_max = std::max(v_max, k.y());
  }
  u_mean /= static_cast<double>(det.keypoints.size());
  double x = depth;
  if (!std::isfinite(x)) {
    double h_min = std::numeric_limits<double>::infinity();
    double h_max = -h_min;
    for (const Vec2& k : model.keypoints) {
      h_min = std::min(h_min, k.y());
      h_max = std::max(h_max, k.y());
    }
    const double span = v_max - v_min;
    x = span > 1e-6 ? cam.fy * (h_max - h_min) / span : 10.0;
  }
  return {x, x * (cam.cx - u_mean) / cam.fx, 0.0};
}

}  // namespace

bool CameraModel::in_fov(const Vec3& p) const {
  if (p.x() <= 0.0) return false;
  return std::abs(std::atan2(p.y(), p.x())) <= 0.5 * hfov_deg * kPi / 180.0;
}

Vec2 CameraModel::to_vehicle(const Vec2& p) const { return rotation(yaw) * p + position.head<2>(); }

Vec2 CameraModel::from_vehicle(const Vec2& p) const {
  return rotation(yaw).transpose() * (p - position.head<2>());
}

ConeModel ConeModel::small_cone() {
  // 325 mm tall, 228 mm base; silhouette edges taper towards the tip.
  const double h = 0.325;
  const auto half = [&](double z) { return 0.114 * (1.0 - z / (h + 0.03)); };
  return ConeModel{{{0.0, h}, {-half(0.2), 0.2}, {half(0.2), 0.2}, {-half(0.1), 0.1}, {half(0.1), 0.1},
                    {-0.114, 0.0}, {0.114, 0.0}}};
}

ConeModel ConeModel::large_cone() {
  const double h = 0.505;
  const auto half = [&](double z) { return 0.142 * (1.0 - z / (h + 0.04)); };
  return ConeModel{{{0.0, h}, {-half(0.32), 0.32}, {half(0.32), 0.32}, {-half(0.16), 0.16}, {half(0.16), 0.16},
                    {-0.142, 0.0}, {0.142, 0.0}}};
}

double cone_cost(const ConeDetection& det, const ConeModel& model, const CameraModel& cam, double depth,
                 const SolverOptions& opts, const Vec3& p) {
  const Problem prob(det, model, cam, depth, opts);
  return prob.eval(p, nullptr).squaredNorm();
}

Vec3 cone_cost_gradient(const ConeDetection& det, const ConeModel& model, const CameraModel& cam, double depth,
                        const SolverOptions& opts, const Vec3& p) {
  const Problem prob(det, model, cam, depth, opts);
  Eigen::MatrixXd j;
  const Eigen::VectorXd r = prob.eval(p, &j);
  return 2.0 * j.transpose() * r;
}

ConeEstimate solve_cone_position(const ConeDetection& det, const ConeModel& model, const CameraModel& cam,
                                 double depth, const SolverOptions& opts, const Vec3* initial) {
  const bool depth_ok = std::isfinite(depth);
  if (det.keypoints.size() < 2 && !(det.keypoints.size() == 1 && depth_ok)) {
    throw std::invalid_argument("cone solver: need two keypoints or one keypoint with depth");
  }
  const Problem prob(det, model, cam, depth, opts);

  Vec3 p = initial != nullptr ? *initial : initial_guess(det, model, cam, depth);
  Eigen::MatrixXd j;
  Eigen::VectorXd r = prob.eval(p, &j);
  double cost = r.squaredNorm();

  ConeEstimate est;
  est.initial_cost = cost;
  double mu = opts.initial_damping;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const Mat3 jtj = j.transpose() * j;
    const Vec3 g = j.transpose() * r;
    Mat3 a = jtj;
    a.diagonal() += mu * jtj.diagonal().cwiseMax(1e-12);
    const Vec3 step = -a.ldlt().solve(g);
    if (!step.allFinite()) break;
    const Vec3 cand = p + step;
    double cand_cost = std::numeric_limits<double>::infinity();
    if (cand.x() > 1e-3) cand_cost = prob.eval(cand, nullptr).squaredNorm();
    if (cand_cost < cost) {
      p = cand;
      r = prob.eval(p, &j);
      cost = cand_cost;
      mu = std::max(mu / 10.0, 1e-12);
    } else {
      mu *= 10.0;
    }
    if (step.norm() < opts.step_tol) {
      ++it;
      break;
    }
  }

  if (!p.allFinite() || !std::isfinite(cost)) throw Error(ErrorCode::NoConvergence, "cone solver diverged");
  if (p.x() <= 0.0) throw Error(ErrorCode::BehindCamera, "cone solution behind camera");

  est.position = p;
  est.final_cost = cost;
  est.iterations = it;
  const Mat3 info = j.transpose() * j;
  Eigen::FullPivLU<Mat3> lu(info);
  if (!lu.isInvertible()) throw Error(ErrorCode::NoConvergence, "information matrix singular at optimum");
  est.cov = lu.inverse();
  est.cov = 0.5 * (est.cov + est.cov.transpose());
  return est;
}

}  // namespace fsd::perception
