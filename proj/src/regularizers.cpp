#include "slimkit/regularizers.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "slimkit/errors.hpp"

namespace slim {
namespace {

double sgn(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

void require_finite(std::span<const double> z) {
  for (double v : z) {
    if (!std::isfinite(v)) throw InvalidInput("penalty input contains a non-finite value");
  }
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

RegularizerSpec RegularizerSpec::l1() { return {PenaltyKind::L1, 1.0, 0.0, 1.0}; }

RegularizerSpec RegularizerSpec::lp(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("lp penalty requires 0 < p < 1");
  return {PenaltyKind::Lp, p, 0.0, 1.0};
}

RegularizerSpec RegularizerSpec::tl1(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw InvalidInput("tl1 penalty requires a > 0");
  return {PenaltyKind::TL1, 1.0, a, 1.0};
}

RegularizerSpec RegularizerSpec::mcp(double a, double lambda_internal) {
  if (!(a > 1.0) || !std::isfinite(a)) throw InvalidInput("mcp penalty requires a > 1");
  if (!(lambda_internal >= 0.0) || !std::isfinite(lambda_internal)) {
    throw InvalidInput("mcp penalty requires lambda >= 0");
  }
  return {PenaltyKind::MCP, 1.0, a, lambda_internal};
}

RegularizerSpec RegularizerSpec::scad(double a, double lambda_internal) {
  if (!(a > 2.0) || !std::isfinite(a)) throw InvalidInput("scad penalty requires a > 2");
  if (!(lambda_internal >= 0.0) || !std::isfinite(lambda_internal)) {
    throw InvalidInput("scad penalty requires lambda >= 0");
  }
  return {PenaltyKind::SCAD, 1.0, a, lambda_internal};
}

double RegularizerSpec::value(double t) const {
  const double x = std::fabs(t);
  switch (kind_) {
    case PenaltyKind::L1:
      return x;
    case PenaltyKind::Lp:
      return x == 0.0 ? 0.0 : std::pow(x, p_);
    case PenaltyKind::TL1:
      return (a_ + 1.0) * x / (a_ + x);
    case PenaltyKind::MCP:
      if (x <= a_ * lambda_) return lambda_ * x - x * x / (2.0 * a_);
      return a_ * lambda_ * lambda_ / 2.0;
    case PenaltyKind::SCAD:
      if (x <= lambda_) return lambda_ * x;
      if (x <= a_ * lambda_) {
        return (2.0 * a_ * lambda_ * x - x * x - lambda_ * lambda_) / (2.0 * (a_ - 1.0));
      }
      return lambda_ * lambda_ * (a_ + 1.0) / 2.0;
  }
  return 0.0;
}

double RegularizerSpec::subgradient(double t) const {
  if (t == 0.0) return 0.0;
  const double x = std::fabs(t);
  const double s = sgn(t);
  switch (kind_) {
    case PenaltyKind::L1:
      return s;
    case PenaltyKind::Lp:
      return p_ * s / std::pow(x, 1.0 - p_);
    case PenaltyKind::TL1:
      return a_ * (a_ + 1.0) * s / ((a_ + x) * (a_ + x));
    case PenaltyKind::MCP:
      if (x > a_ * lambda_) return 0.0;
      return lambda_ * s - t / a_;
    case PenaltyKind::SCAD:
      if (x > a_ * lambda_) return 0.0;
      if (x > lambda_) return (a_ * lambda_ * s - t) / (a_ - 1.0);
      return lambda_ * s;
  }
  return 0.0;
}

std::string RegularizerSpec::label() const {
  switch (kind_) {
    case PenaltyKind::L1:
      return "l1";
    case PenaltyKind::Lp:
      return "lp(p=" + format_number(p_) + ")";
    case PenaltyKind::TL1:
      return "tl1(a=" + format_number(a_) + ")";
    case PenaltyKind::MCP:
      return "mcp(a=" + format_number(a_) + ")";
    case PenaltyKind::SCAD:
      return "scad(a=" + format_number(a_) + ")";
  }
  return "?";
}

double penalty_value(const RegularizerSpec& spec, std::span<const double> z) {
  require_finite(z);
  double total = 0.0;
  for (double v : z) total += spec.value(v);
  return total;
}

std::vector<double> penalty_subgradient(const RegularizerSpec& spec, std::span<const double> z,
                                        SubgradientPolicy policy) {
  require_finite(z);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    switch (policy) {
      case SubgradientPolicy::SelectZero:
        out[i] = spec.subgradient(z[i]);
        break;
    }
  }
  return out;
}

RegularizerSpec parse_regularizer(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  double param = 0.0;
  const bool has_param = colon != std::string::npos;
  if (has_param) {
    const std::string arg = text.substr(colon + 1);
    const auto* first = arg.data();
    const auto* last = arg.data() + arg.size();
    auto [ptr, ec] = std::from_chars(first, last, param);
    if (ec != std::errc() || ptr != last || arg.empty()) {
      throw InvalidInput("bad regularizer parameter in '" + text + "'");
    }
  }
  if (name == "l1" && !has_param) return RegularizerSpec::l1();
  if (!has_param) throw InvalidInput("regularizer '" + text + "' needs a parameter (e.g. tl1:0.5)");
  if (name == "lp") return RegularizerSpec::lp(param);
  if (name == "tl1") return RegularizerSpec::tl1(param);
  if (name == "mcp") return RegularizerSpec::mcp(param);
  if (name == "scad") return RegularizerSpec::scad(param);
  throw InvalidInput("unknown regularizer '" + text + "'");
}

}  // namespace slim
