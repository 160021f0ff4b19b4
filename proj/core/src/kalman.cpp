#include <Eigen/Dense>
#include <cmath>

#include "cova/tracking.hpp"

namespace cova {
namespace {

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7, Eigen::RowMajor>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using Mat47 = Eigen::Matrix<double, 4, 7>;

Mat7 transition() {
  Mat7 f = Mat7::Identity();
  f(0, 4) = 1.0;
  f(1, 5) = 1.0;
  f(2, 6) = 1.0;
  return f;
}

Mat47 observation() {
  Mat47 h = Mat47::Zero();
  for (int i = 0; i < 4; ++i) h(i, i) = 1.0;
  return h;
}

}  // namespace

std::array<double, 4> box_to_measurement(const Box& b) {
  return {b.center_x(), b.center_y(), b.w * b.h, b.h > 0.0 ? b.w / b.h : 0.0};
}

Box measurement_to_box(double u, double v, double s, double r) {
  const double w = (s > 0.0 && r > 0.0) ? std::sqrt(s * r) : 0.0;
  const double h = w > 0.0 ? s / w : 0.0;
  return Box{u - 0.5 * w, v - 0.5 * h, w, h};
}

Box state_box(const KalmanBoxState& st) { return measurement_to_box(st.mean[0], st.mean[1], st.mean[2], st.mean[3]); }

KalmanBoxState kalman_init(const Box& box, const KalmanParams& params) {
  KalmanBoxState st;
  const auto z = box_to_measurement(box);
  for (int i = 0; i < 4; ++i) st.mean[static_cast<std::size_t>(i)] = z[static_cast<std::size_t>(i)];
  Eigen::Map<Mat7> p(st.covariance.data());
  p.setZero();
  for (int i = 0; i < 7; ++i) p(i, i) = params.initial_covariance[static_cast<std::size_t>(i)];
  return st;
}

KalmanBoxState kalman_predict(KalmanBoxState st, const KalmanParams& params) {
  static const Mat7 f = transition();
  Eigen::Map<Vec7> x(st.mean.data());
  Eigen::Map<Mat7> p(st.covariance.data());
  x = f * x;
  Mat7 q = Mat7::Zero();
  for (int i = 0; i < 7; ++i) q(i, i) = params.process_noise[static_cast<std::size_t>(i)];
  Mat7 next = f * p * f.transpose() + q;
  p = 0.5 * (next + next.transpose());
  if (x(2) <= 0.0 || x(3) <= 0.0) {
    x(2) = std::max(x(2), params.min_scale);
    x(3) = std::max(x(3), params.min_scale);
    ++st.clamp_count;
  }
  ++st.frames_since_update;
  if (st.frames_since_update > 1) st.hit_streak = 0;
  return st;
}

KalmanBoxState kalman_update(KalmanBoxState st, const Box& measured, const KalmanParams& params) {
  static const Mat47 h = observation();
  Eigen::Map<Vec7> x(st.mean.data());
  Eigen::Map<Mat7> p(st.covariance.data());
  const auto zm = box_to_measurement(measured);
  const Eigen::Vector4d z(zm[0], zm[1], zm[2], zm[3]);
  Mat4 r = Mat4::Zero();
  for (int i = 0; i < 4; ++i) r(i, i) = params.measurement_noise[static_cast<std::size_t>(i)];
  const Eigen::Vector4d y = z - h * x;
  const Mat4 s = h * p * h.transpose() + r;
  const Eigen::Matrix<double, 7, 4> k = p * h.transpose() * s.inverse();
  x += k * y;
  const Mat7 next = (Mat7::Identity() - k * h) * p;
  p = 0.5 * (next + next.transpose());
  st.frames_since_update = 0;
  ++st.hit_streak;
  return st;
}

}  // namespace cova
