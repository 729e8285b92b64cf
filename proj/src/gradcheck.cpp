#include "gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace loga {

namespace {
constexpr uint64_t kTagPixels = 0x9c0ffee1;
constexpr uint64_t kTagTrip = 0x9c0ffee2;
constexpr uint64_t kTagFc = 0x9c0ffee3;

// two-sided comparison: absolute differences below the floor are treated as
// finite-difference roundoff, everything else is scored relatively
double rel_error(double num, double ana, double abs_floor) {
  double diff = std::fabs(num - ana);
  if (diff < abs_floor) return 0.0;
  return diff / std::max(std::fabs(num), std::fabs(ana));
}

}  // namespace

GradCheckSetup make_gradcheck_setup(uint64_t seed) {
  GradCheckSetup s;
  s.seed = seed;
  s.model_config.feature_dim = 8;
  s.model_config.clip_len = 4;
  s.model_config.part_size = 8;
  s.model_config.height = 8;
  s.model_config.width = 8;
  s.model_config.channels = 1;
  s.model_config.num_classes = 3;
  s.model_config.strategy = Strategy::associative;

  Rng rng(mix_seed(seed, kTagPixels));
  long values = static_cast<long>(s.model_config.clip_len) * s.model_config.channels *
                s.model_config.height * s.model_config.width;
  for (int i = 0; i < 4; ++i) {
    std::vector<float> px(static_cast<size_t>(values));
    for (float& v : px) v = static_cast<float>(rng.uniform());
    s.clips.push_back(std::move(px));
  }
  s.labels = {0, 0, 1, 1};
  return s;
}

namespace {

template <class T>
NodePtr<T> build_loss(const LogaModel<T>& model, const GradCheckSetup& setup) {
  std::vector<const std::vector<float>*> px;
  for (const auto& c : setup.clips) px.push_back(&c);
  auto descriptors = model.forward_batch(px, Mode::train);
  std::vector<NodePtr<T>> xs;
  for (auto& d : descriptors) xs.push_back(d.x);
  Rng trip_rng(mix_seed(setup.seed, kTagTrip));
  return batch_loss(xs, setup.labels, model.classifier(), static_cast<T>(setup.margin),
                    trip_rng, TripletMining::random)
      .total;
}

}  // namespace

template <class T>
void gradcheck_prepare(LogaModel<T>& model, const GradCheckSetup& setup) {
  Rng rng(mix_seed(setup.seed, kTagFc));
  auto fc_w = model.store().find_param("gcq.fc.w");
  auto fc_b = model.store().find_param("gcq.fc.b");
  for (long i = 0; i < fc_w->value.size(); ++i)
    fc_w->value[i] = static_cast<T>(rng.uniform(-0.3, 0.3));
  for (long i = 0; i < fc_b->value.size(); ++i)
    fc_b->value[i] = static_cast<T>(rng.uniform(-0.3, 0.3));
}

template <class T>
double gradcheck_forward(const LogaModel<T>& model, const GradCheckSetup& setup) {
  return static_cast<double>(build_loss(model, setup)->value[0]);
}

template <class T>
std::vector<Tensor<T>> gradcheck_analytic(LogaModel<T>& model, const GradCheckSetup& setup) {
  auto loss = build_loss(model, setup);
  model.store().zero_grads();
  backward(loss);
  std::vector<Tensor<T>> grads;
  for (const auto& [name, p] : model.store().params())
    grads.push_back(p->has_grad ? p->grad : Tensor<T>::zeros(p->value.shape()));
  model.store().zero_grads();
  return grads;
}

template <class T>
GradCheckReport gradcheck_compare(LogaModel<T>& model, const GradCheckSetup& setup,
                                  const std::vector<Tensor<T>>& analytic, double h,
                                  double threshold) {
  GradCheckReport report;
  report.threshold = threshold;
  auto& store = model.store();
  require(analytic.size() == store.params().size(), ErrCode::invalid_arg,
          "gradcheck: analytic gradient count mismatch");
  for (size_t k = 0; k < store.params().size(); ++k) {
    auto& p = store.params()[k].second;
    GradCheckGroup group;
    group.name = store.params()[k].first;
    for (long i = 0; i < p->value.size(); ++i) {
      T keep = p->value[i];
      p->value[i] = static_cast<T>(static_cast<double>(keep) + h);
      double fp = gradcheck_forward(model, setup);
      p->value[i] = static_cast<T>(static_cast<double>(keep) - h);
      double fm = gradcheck_forward(model, setup);
      p->value[i] = keep;
      double num = (fp - fm) / (2 * h);
      double ana = static_cast<double>(analytic[k][i]);
      group.max_rel_err = std::max(group.max_rel_err, rel_error(num, ana, 1e-8));
    }
    report.worst = std::max(report.worst, group.max_rel_err);
    report.groups.push_back(std::move(group));
  }
  report.passed = report.worst < threshold;
  return report;
}

GradCheckReport gradcheck_run(const std::string& dtype, uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  GradCheckSetup setup = make_gradcheck_setup(seed);
  GradCheckReport report;
  if (dtype == "float64") {
    LogaModel<double> model(setup.model_config, seed);
    gradcheck_prepare(model, setup);
    auto analytic = gradcheck_analytic(model, setup);
    report = gradcheck_compare(model, setup, analytic, 1e-5, 1e-4);
  } else if (dtype == "float32") {
    // informational: float32 finite differences are noisy by nature
    LogaModel<float> model(setup.model_config, seed);
    gradcheck_prepare(model, setup);
    auto analytic = gradcheck_analytic(model, setup);
    report = gradcheck_compare(model, setup, analytic, 1e-2, 5e-2);
  } else {
    raise(ErrCode::config, "unknown gradcheck dtype '", dtype,
          "' (expected float64 or float32)");
  }
  report.dtype = dtype;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string format_gradcheck_report(const GradCheckReport& report) {
  std::ostringstream os;
  os << "gradient check (" << report.dtype << ", threshold " << report.threshold << ")\n";
  for (const auto& g : report.groups) {
    char line[160];
    std::snprintf(line, sizeof(line), "  %-22s max_rel_err %.3e %s\n", g.name.c_str(),
                  g.max_rel_err, g.max_rel_err < report.threshold ? "ok" : "FAIL");
    os << line;
  }
  char tail[160];
  std::snprintf(tail, sizeof(tail), "worst %.3e over %zu groups in %.2fs: %s\n", report.worst,
                report.groups.size(), report.seconds, report.passed ? "PASS" : "FAIL");
  os << tail;
  return os.str();
}

template void gradcheck_prepare(LogaModel<float>&, const GradCheckSetup&);
template void gradcheck_prepare(LogaModel<double>&, const GradCheckSetup&);
template double gradcheck_forward(const LogaModel<float>&, const GradCheckSetup&);
template double gradcheck_forward(const LogaModel<double>&, const GradCheckSetup&);
template std::vector<Tensor<float>> gradcheck_analytic(LogaModel<float>&, const GradCheckSetup&);
template std::vector<Tensor<double>> gradcheck_analytic(LogaModel<double>&,
                                                        const GradCheckSetup&);
template GradCheckReport gradcheck_compare(LogaModel<float>&, const GradCheckSetup&,
                                           const std::vector<Tensor<float>>&, double, double);
template GradCheckReport gradcheck_compare(LogaModel<double>&, const GradCheckSetup&,
                                           const std::vector<Tensor<double>>&, double, double);

}  // namespace loga
