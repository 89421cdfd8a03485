#include "wbnmpc/ocp/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace wbnmpc::ocp {

void ContactSchedule::validate() const {
  if (N < 2) throw std::invalid_argument("ContactSchedule: need at least 2 stages");
  if (dt.size() != N) throw std::invalid_argument("ContactSchedule: dt must have N entries");
  if ((dt.array() <= 0.0).any()) throw std::invalid_argument("ContactSchedule: dt must be positive");
  if (theta.cols() != N + 1 || z_ref.cols() != N + 1 || theta.rows() != z_ref.rows())
    throw std::invalid_argument("ContactSchedule: theta/z_ref must be num_contacts x (N+1)");
  for (int c = 0; c < theta.rows(); ++c)
    for (int k = 0; k <= N; ++k) {
      const double th = theta(c, k);
      if (th != 0.0 && th != 1.0)
        throw std::invalid_argument("ContactSchedule: theta entries must be 0 or 1");
      if (th == 1.0 && z_ref(c, k) != 0.0)
        throw std::invalid_argument("ContactSchedule: z_ref must be 0 in stance");
    }
}

ContactSchedule make_gait(const GaitSpec& gait, int num_contacts, int N, double T, double t0) {
  if (N < 2) throw std::invalid_argument("make_gait: N must be at least 2");
  if (!(T > 0.0)) throw std::invalid_argument("make_gait: horizon must be positive");
  if (!(gait.duty > 0.0 && gait.duty <= 1.0))
    throw std::invalid_argument("make_gait: duty must lie in (0, 1]");

  ContactSchedule s;
  s.N = N;
  const double dtu = T / N;
  s.dt = Eigen::VectorXd::Constant(N, dtu);
  s.theta = Eigen::MatrixXd::Ones(num_contacts, N + 1);
  s.z_ref = Eigen::MatrixXd::Zero(num_contacts, N + 1);
  if (gait.type == GaitType::Stand) return s;

  if (gait.period < 2.0 * dtu)
    throw std::invalid_argument("make_gait: period shorter than two stages");

  for (int c = 0; c < num_contacts; ++c) {
    const double offset = static_cast<double>(c) / num_contacts;
    for (int k = 0; k <= N; ++k) {
      const double t = t0 + (k < N ? (k + 0.5) * dtu : T);
      double phase = std::fmod(t / gait.period + offset, 1.0);
      if (phase < 0.0) phase += 1.0;
      if (phase < gait.duty) continue;  // stance defaults already set
      s.theta(c, k) = 0.0;
      const double swing = (phase - gait.duty) / (1.0 - gait.duty);
      s.z_ref(c, k) = gait.swing_apex * std::sin(M_PI * swing);
    }
  }
  return s;
}

}  // namespace wbnmpc::ocp
