#include "evopp/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "evopp/errors.hpp"

namespace evopp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Even k_points grid over (0, upto] merged with the events at or before upto.
// The endpoint is pushed exactly, not as upto * k / k, so it always survives
// deduplication as a single node.
void build_merged_grid(const PointPattern& pattern, double upto, int k_points,
                       std::vector<double>& s, std::vector<std::uint8_t>& is_event) {
  s.clear();
  s.reserve(static_cast<std::size_t>(k_points) + 1 + pattern.size());
  for (int k = 0; k < k_points; ++k) s.push_back(upto * k / k_points);
  s.push_back(upto);
  for (double t : pattern.times()) {
    if (t <= upto) s.push_back(t);
  }
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());

  is_event.assign(s.size(), 0);
  std::size_t next = 0;
  for (std::size_t j = 0; j < s.size() && next < pattern.size(); ++j) {
    if (pattern[next] > upto) break;
    if (s[j] == pattern[next]) {
      is_event[j] = 1;
      ++next;
    }
  }
}

double merge_ll(double event_terms, double comp) {
  const double ll = event_terms - comp;
  // An infinite compensator (e.g. an overflowing exponential link) and the
  // -inf event case both collapse to an impossible model.
  if (std::isnan(ll) || ll == kInf) return -kInf;
  return ll;
}

}  // namespace

double conditional_intensity(const ModelSpec& model, const PointPattern& pattern, double s,
                             const ExpRecursionState* state) {
  if (!(s >= 0.0) || s > pattern.horizon()) {
    std::ostringstream msg;
    msg << "intensity query at " << s << " is outside [0, " << pattern.horizon() << "]";
    throw std::invalid_argument(msg.str());
  }
  return model.link.apply(background_argument(model.background, s) +
                          kernel_sum_at(model.kernel, pattern, s, state));
}

double compensator(const ModelSpec& model, const PointPattern& pattern, double upto) {
  if (!std::isfinite(upto) || upto <= 0.0 || upto > pattern.horizon()) {
    std::ostringstream msg;
    msg << "compensator bound " << upto << " must lie in (0, " << pattern.horizon() << "]";
    throw std::invalid_argument(msg.str());
  }
  std::vector<double> s;
  std::vector<std::uint8_t> is_event;
  build_merged_grid(pattern, upto, model.quad_points, s, is_event);

  KernelSumStream stream(model.kernel, pattern);
  double comp = 0.0;
  double prev_s = s[0];
  double prev_right =
      model.link.apply(background_argument(model.background, s[0]) + stream.just_after(s[0]));
  for (std::size_t j = 1; j < s.size(); ++j) {
    const double bg = background_argument(model.background, s[j]);
    const double ks = stream.before(s[j]);
    const double left = model.link.apply(bg + ks);
    comp += 0.5 * (prev_right + left) * (s[j] - prev_s);
    prev_s = s[j];
    prev_right = is_event[j] ? model.link.apply(bg + stream.just_after(s[j])) : left;
  }
  return comp;
}

double log_likelihood(const ModelSpec& model, const PointPattern& pattern) {
  if (model.kernel.family == KernelFamily::None &&
      model.background.form == BackgroundForm::Constant) {
    // Homogeneous Poisson: lambda is constant, so the quadrature is exact and
    // the closed form is cheaper.
    const double lam = model.link.apply(model.background.mu);
    const double n = static_cast<double>(pattern.size());
    if (lam <= 0.0) return pattern.empty() ? 0.0 : -kInf;
    return -lam * pattern.horizon() + n * std::log(lam);
  }
  LikelihoodEvaluator evaluator(model, pattern);
  return evaluator.evaluate(model);
}

LikelihoodEvaluator::LikelihoodEvaluator(const ModelSpec& shape, const PointPattern& pattern)
    : horizon_(pattern.horizon()), quad_points_(shape.quad_points) {
  shape.validate();
  has_gp_ = shape.background.form == BackgroundForm::LogLinearSeasonalGP;
  seasonal_ = shape.background.form != BackgroundForm::Constant;
  build_grid(pattern, horizon_, shape.quad_points);

  const std::size_t m = s_.size();
  if (seasonal_) {
    sinv_.resize(m);
    cosv_.resize(m);
    const double omega = 2.0 * std::numbers::pi / shape.background.period;
    for (std::size_t j = 0; j < m; ++j) {
      sinv_[j] = std::sin(omega * s_[j]);
      cosv_[j] = std::cos(omega * s_[j]);
    }
  }
  if (has_gp_) {
    const LatentGP& gp = *shape.background.gp;
    cell_.resize(m);
    const std::size_t cells = gp.grid_times.size();
    cell_first_.assign(cells, m);  // m marks an empty cell
    cell_last_.assign(cells, 0);
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t c = gp.cell_of(s_[j]);
      cell_[j] = static_cast<std::int32_t>(c);
      if (cell_first_[c] == m) cell_first_[c] = j;
      cell_last_[c] = j;
    }
    bg_log_.resize(m);
  }
  unit_left_.resize(m);
  unit_right_.resize(m);
  lam_left_.resize(m);
  lam_right_.resize(m);
}

void LikelihoodEvaluator::build_grid(const PointPattern& pattern, double horizon,
                                     int quad_points) {
  build_merged_grid(pattern, horizon, quad_points, s_, is_event_);
  // Keep a reference to the pattern via the grid only; the event times are
  // exactly the flagged nodes.
}

void LikelihoodEvaluator::rebuild_unit_sums(const TriggerKernel& kernel) {
  const std::size_t m = s_.size();
  if (kernel.family == KernelFamily::None) {
    std::fill(unit_left_.begin(), unit_left_.end(), 0.0);
    std::fill(unit_right_.begin(), unit_right_.end(), 0.0);
  } else {
    TriggerKernel unit = kernel;
    unit.alpha = 1.0;
    const double f0 = unit.density_limit_at_zero();
    const double jump = std::isfinite(f0) ? f0 : 0.0;
    if (unit.family == KernelFamily::Exponential) {
      // Stream the decayed sum directly over the node sequence.
      const double beta = unit.beta;
      double decayed = 0.0;
      double ref = 0.0;
      bool any = false;
      for (std::size_t j = 0; j < m; ++j) {
        const double sum = any ? decayed * std::exp(-beta * (s_[j] - ref)) : 0.0;
        unit_left_[j] = beta * sum;
        unit_right_[j] = unit_left_[j];
        if (is_event_[j]) {
          unit_right_[j] += jump;
          decayed = sum + 1.0;
          ref = s_[j];
          any = true;
        }
      }
    } else {
      // Direct sums: O(events x nodes), the documented cost for the
      // non-exponential families. Compact-support shapes stop at lag beta.
      const bool compact =
          unit.family == KernelFamily::Uniform || unit.family == KernelFamily::Triangle;
      std::vector<double> events;
      events.reserve(64);
      for (std::size_t j = 0; j < m; ++j) {
        double sum = 0.0;
        if (compact) {
          for (auto it = events.rbegin(); it != events.rend(); ++it) {
            const double dt = s_[j] - *it;
            if (dt >= unit.beta) break;
            sum += unit.density(dt);
          }
        } else {
          for (double t : events) sum += unit.density(s_[j] - t);
        }
        unit_left_[j] = sum;
        unit_right_[j] = is_event_[j] ? sum + jump : sum;
        if (is_event_[j]) events.push_back(s_[j]);
      }
    }
  }
  sums_family_ = kernel.family;
  sums_beta_ = kernel.beta;
  sums_nu_ = kernel.nu;
  sums_valid_ = true;
}

double LikelihoodEvaluator::evaluate(const ModelSpec& model) {
  const std::size_t m = s_.size();
  const bool model_gp = model.background.form == BackgroundForm::LogLinearSeasonalGP;
  const bool model_seasonal = model.background.form != BackgroundForm::Constant;
  if (model_gp != has_gp_ || (model_seasonal && !seasonal_)) {
    throw std::invalid_argument("evaluator was built for a different background form");
  }
  if (model.quad_points != quad_points_) {
    throw std::invalid_argument("evaluator was built for a different quadrature size");
  }
  if (!sums_valid_ || model.kernel.family != sums_family_ || model.kernel.beta != sums_beta_ ||
      model.kernel.nu != sums_nu_) {
    rebuild_unit_sums(model.kernel);
  }
  const double alpha = model.kernel.family == KernelFamily::None ? 0.0 : model.kernel.alpha;
  const LinkFunction link = model.link;
  const BackgroundModel& bg = model.background;

  double comp = 0.0;
  double event_terms = 0.0;
  bool dead = false;  // an event with nonpositive intensity
  double prev_right = 0.0;
  double prev_s = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double base;
    if (!model_seasonal) {
      base = bg.mu;
    } else {
      double log_bg = bg.mu + bg.gamma1 * sinv_[j] + bg.gamma2 * cosv_[j];
      if (model_gp) {
        bg_log_[j] = log_bg;
        log_bg += bg.gp->w_star[static_cast<std::size_t>(cell_[j])];
      }
      base = std::exp(log_bg);
    }
    const double left = link.apply(base + alpha * unit_left_[j]);
    const double right =
        is_event_[j] ? link.apply(base + alpha * unit_right_[j]) : left;
    lam_left_[j] = left;
    lam_right_[j] = right;
    if (j > 0) comp += 0.5 * (prev_right + left) * (s_[j] - prev_s);
    if (is_event_[j]) {
      if (left <= 0.0) {
        dead = true;
      } else {
        event_terms += std::log(left);
      }
    }
    prev_right = right;
    prev_s = s_[j];
  }
  if (dead) event_terms = -kInf;

  comp_ = comp;
  event_terms_ = event_terms;
  ll_ = merge_ll(event_terms, comp);
  pending_ = false;
  evaluated_ = true;
  return ll_;
}

double LikelihoodEvaluator::propose_gp(const ModelSpec& model, std::size_t cell, double w_new) {
  if (!has_gp_) throw std::invalid_argument("evaluator has no latent process");
  if (!evaluated_) throw std::logic_error("propose_gp needs a prior evaluate");
  if (cell >= cell_first_.size()) throw std::invalid_argument("latent cell out of range");

  const std::size_t m = s_.size();
  const std::size_t first = cell_first_[cell];
  pending_ = true;
  if (first == m) {  // no quadrature node in this cell: likelihood unchanged
    pend_first_ = m;
    pend_last_ = m;
    pend_comp_ = comp_;
    pend_event_terms_ = event_terms_;
    pend_ll_ = ll_;
    return pend_ll_;
  }
  const std::size_t last = cell_last_[cell];
  const double alpha = model.kernel.family == KernelFamily::None ? 0.0 : model.kernel.alpha;
  const LinkFunction link = model.link;

  const std::size_t span = last - first + 1;
  pend_lam_left_.resize(span);
  pend_lam_right_.resize(span);

  double d_events = 0.0;
  bool dead = false;
  for (std::size_t j = first; j <= last; ++j) {
    const double base = std::exp(bg_log_[j] + w_new);
    const double left = link.apply(base + alpha * unit_left_[j]);
    const double right = is_event_[j] ? link.apply(base + alpha * unit_right_[j]) : left;
    pend_lam_left_[j - first] = left;
    pend_lam_right_[j - first] = right;
    if (is_event_[j]) {
      if (left <= 0.0) {
        dead = true;
      } else {
        d_events += std::log(left) - std::log(lam_left_[j]);
      }
    }
  }

  // Segments touching the changed nodes: j-1 -> j for j in [first, last + 1].
  double d_comp = 0.0;
  const std::size_t seg_lo = std::max<std::size_t>(first, 1);
  const std::size_t seg_hi = std::min<std::size_t>(last + 1, m - 1);
  for (std::size_t j = seg_lo; j <= seg_hi; ++j) {
    const double old_r = lam_right_[j - 1];
    const double old_l = lam_left_[j];
    const double new_r =
        (j - 1 >= first && j - 1 <= last) ? pend_lam_right_[j - 1 - first] : old_r;
    const double new_l = (j >= first && j <= last) ? pend_lam_left_[j - first] : old_l;
    d_comp += 0.5 * ((new_r + new_l) - (old_r + old_l)) * (s_[j] - s_[j - 1]);
  }

  pend_first_ = first;
  pend_last_ = last;
  pend_comp_ = comp_ + d_comp;
  pend_event_terms_ = dead ? -kInf : event_terms_ + d_events;
  pend_ll_ = merge_ll(pend_event_terms_, pend_comp_);
  return pend_ll_;
}

void LikelihoodEvaluator::accept_gp_proposal() {
  if (!pending_) throw std::logic_error("no latent proposal to accept");
  if (pend_first_ < s_.size()) {
    std::copy(pend_lam_left_.begin(), pend_lam_left_.end(), lam_left_.begin() + pend_first_);
    std::copy(pend_lam_right_.begin(), pend_lam_right_.end(), lam_right_.begin() + pend_first_);
  }
  comp_ = pend_comp_;
  event_terms_ = pend_event_terms_;
  ll_ = pend_ll_;
  pending_ = false;
}

}  // namespace evopp
