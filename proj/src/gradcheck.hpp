#pragma once

#include <string>
#include <vector>

#include "model.hpp"

namespace loga {

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double worst = 0;
  bool passed = false;
  double threshold = 1e-4;
  double seconds = 0;
  std::string dtype;
};

// Fixed tiny configuration for whole-model gradient verification.
struct GradCheckSetup {
  ModelConfig model_config;
  std::vector<std::vector<float>> clips;  // random pixel clips
  std::vector<long> labels;
  double margin = 0.3;
  uint64_t seed = 0;
};

GradCheckSetup make_gradcheck_setup(uint64_t seed);

// Fills the zero-initialized fusion FC with small random values so gradient
// flows through every branch of the graph (a pristine model would pass the
// GCQ groups vacuously).
template <class T>
void gradcheck_prepare(LogaModel<T>& model, const GradCheckSetup& setup);

// One evaluation of the training loss on the setup batch (train mode).
template <class T>
double gradcheck_forward(const LogaModel<T>& model, const GradCheckSetup& setup);

// Analytic gradients of the loss for every parameter, in store order.
template <class T>
std::vector<Tensor<T>> gradcheck_analytic(LogaModel<T>& model, const GradCheckSetup& setup);

// Central finite differences against the supplied analytic gradients;
// one report entry per parameter group. Groups above `threshold` fail.
template <class T>
GradCheckReport gradcheck_compare(LogaModel<T>& model, const GradCheckSetup& setup,
                                  const std::vector<Tensor<T>>& analytic, double h,
                                  double threshold);

// Full run: instantiate the tiny model in the requested dtype ("float64" by
// default; "float32" is informational with a loose threshold), compare
// against central differences, report per-group maxima.
GradCheckReport gradcheck_run(const std::string& dtype, uint64_t seed);

std::string format_gradcheck_report(const GradCheckReport& report);

}  // namespace loga
