#pragma once

// Per-type D2D benefits from mean-opinion-score models: a logistic curve in
// PSNR for video, a logarithmic curve in throughput for elastic traffic.
// A benefit is the MOS gain of D2D mode over cellular mode.

#include <cmath>
#include <stdexcept>
#include <string>

namespace d2dtoken {

enum class LogBase { natural, base10 };

inline const char* log_base_name(LogBase b) { return b == LogBase::natural ? "natural" : "base10"; }

inline LogBase parse_log_base(const std::string& s) {
  if (s == "natural" || s == "e" || s == "ln") return LogBase::natural;
  if (s == "base10" || s == "10" || s == "log10") return LogBase::base10;
  throw std::invalid_argument("unknown log base '" + s + "' (use natural or base10)");
}

struct MosParams {
  double b1 = 1.0;      // video slope
  double b2 = 5.0;      // video midpoint, dB
  double b3 = 2.6949;   // elastic scale
  double b4 = 0.0235;   // elastic throughput scale, per kbps
  LogBase log_base = LogBase::natural;
};

inline void validate_mos_params(const MosParams& p) {
  if (!(p.b1 > 0.0)) throw std::invalid_argument("MOS parameter b1 must be positive");
  if (!(p.b3 > 0.0)) throw std::invalid_argument("MOS parameter b3 must be positive");
  if (!(p.b4 > 0.0)) throw std::invalid_argument("MOS parameter b4 must be positive");
}

struct LinkQuality {
  double psnr_db = 0.0;
  double throughput_kbps = 0.0;
};

enum class TrafficKind { video, elastic };

inline const char* kind_name(TrafficKind k) { return k == TrafficKind::video ? "video" : "elastic"; }

inline TrafficKind parse_traffic_kind(const std::string& s) {
  if (s == "video") return TrafficKind::video;
  if (s == "elastic") return TrafficKind::elastic;
  throw std::invalid_argument("unknown traffic kind '" + s + "' (use video or elastic)");
}

class NonPositiveMos : public std::domain_error {
 public:
  explicit NonPositiveMos(double scaled_throughput)
      : std::domain_error("elastic MOS needs b4 * throughput > 1, got " + std::to_string(scaled_throughput)) {}
};

inline double mos_video(const MosParams& p, double psnr_db) {
  return 4.5 - 3.5 / (1.0 + std::exp(p.b1 * (psnr_db - p.b2)));
}

inline double mos_elastic(const MosParams& p, double throughput_kbps) {
  const double x = p.b4 * throughput_kbps;
  if (!(x > 1.0)) throw NonPositiveMos(x);
  return p.b3 * (p.log_base == LogBase::natural ? std::log(x) : std::log10(x));
}

inline double mos(const MosParams& p, const LinkQuality& link, TrafficKind kind) {
  return kind == TrafficKind::video ? mos_video(p, link.psnr_db) : mos_elastic(p, link.throughput_kbps);
}

inline double benefit_from_mos(const MosParams& p, const LinkQuality& d2d, const LinkQuality& cellular,
                               TrafficKind kind) {
  const double gain = mos(p, d2d, kind) - mos(p, cellular, kind);
  if (gain < 0.0) {
    throw std::invalid_argument(std::string(kind_name(kind)) + " MOS over D2D is below cellular (gain " +
                                std::to_string(gain) + ")");
  }
  return gain;
}

}  // namespace d2dtoken
