#pragma once

#include <ostream>
#include <stdexcept>
#include <string>

#include "pwmsi/analysis.hpp"
#include "pwmsi/format.hpp"
#include "pwmsi/plant.hpp"
#include "pwmsi/pwm.hpp"
#include "pwmsi/sim.hpp"

namespace pwmsi {

/// t,x1..xn,u,u_pwm,y,y_noisy,yhat_a,yhat_v,xbar1..xbarn,eta1..etaq,x1ref,d
inline std::string csv_header(int n, int q) {
  std::string h = "t";
  for (int i = 1; i <= n; ++i) h += ",x" + std::to_string(i);
  h += ",u,u_pwm,y,y_noisy,yhat_a,yhat_v";
  for (int i = 1; i <= n; ++i) h += ",xbar" + std::to_string(i);
  for (int i = 1; i <= q; ++i) h += ",eta" + std::to_string(i);
  h += ",x1ref,d";
  return h;
}

/// Writes one trace as CSV with LF line endings and 17-digit numbers.
///
/// The xbar columns come from `averaged` when given (the `both` file: switched
/// channels plus the averaged state on the shared grid). Otherwise a switched
/// trace reports x - eps g(x) s1(u, t/eps) and an averaged trace reports x.
inline void write_trace_csv(std::ostream& os, const SimTrace& trace, const SisoPlant& plant, const PwmConfig& pwm,
                            const SimTrace* averaged = nullptr) {
  if (trace.size() == 0) throw std::invalid_argument("write_trace_csv: empty trace");
  if (averaged && (averaged->size() != trace.size() || averaged->samples_per_period != trace.samples_per_period)) {
    throw std::invalid_argument("write_trace_csv: traces are not on the same grid");
  }
  const auto n = static_cast<int>(trace.x.front().size());
  const auto q = static_cast<int>(trace.eta.front().size());
  os << csv_header(n, q) << '\n';

  std::string line;
  auto put = [&line](double v) {
    line += ',';
    line += format_double(v);
  };
  for (std::size_t i = 0; i < trace.size(); ++i) {
    line = format_double(trace.t[i]);
    for (int j = 0; j < n; ++j) put(trace.x[i](j));
    put(trace.u[i]);
    put(trace.u_pwm[i]);
    put(trace.y[i]);
    put(trace.y_noisy[i]);
    put(trace.yhat_a[i]);
    put(trace.yhat_v[i]);
    Vector xbar;
    if (averaged) {
      xbar = averaged->x[i];
    } else if (trace.kind == SimTrace::Kind::kActual) {
      xbar = averaged_state(plant, pwm, trace.x[i], trace.u[i],
                            static_cast<double>(i) / trace.samples_per_period);
    } else {
      xbar = trace.x[i];
    }
    for (int j = 0; j < n; ++j) put(xbar(j));
    for (int j = 0; j < q; ++j) put(trace.eta[i](j));
    put(trace.x1ref[i]);
    put(trace.d[i]);
    line += '\n';
    os << line;
  }
}

}  // namespace pwmsi
