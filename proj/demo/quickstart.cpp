// Minimal library walkthrough: set up a search space, plug in an objective,
// and run the optimizer. Everything here is also reachable through the CLI;
// use this as the starting point for embedding the library directly.

#include <boil/boil.hpp>

#include <iostream>

namespace {

// Objectives implement one method: train with hyperparameters x for t
// iterations and hand back the per-iteration scores plus cumulative cost.
// This toy "trainer" converges faster (and cheaper) the closer lr is to 0.3.
class ToyTrainer : public boil::Objective {
 public:
  boil::LearningCurve evaluate(const Eigen::VectorXd& x_raw, int t) override {
    boil::LearningCurve curve;
    curve.x_raw = x_raw;
    const double miss = std::abs(x_raw[0] - 0.3);
    const double plateau = 1.0 - miss;
    const double rate = 12.0 * (1.0 + miss);
    for (int u = 1; u <= t; ++u) {
      curve.scores.push_back(plateau * (1.0 - std::exp(-u / rate)));
      curve.cum_cost.push_back(u * (1.0 + x_raw[0]));
    }
    return curve;
  }
};

}  // namespace

int main() {
  boil::SearchSpace space;
  space.dims = {{"lr", 0.0, 1.0, boil::AxisScale::Linear}};
  space.t_min = 20;
  space.t_max = 80;

  boil::RunOptions opt;
  opt.n_evals = 12;

  ToyTrainer trainer;
  boil::TuneResult result = boil::run_boil(trainer, space, opt, /*seed=*/1,
                                           [](const boil::EvalRecord& r) {
                                             std::cout << boil::record_to_line(r);
                                           });

  std::cout << "\nbest lr: " << result.x_star[0] << "\n";
  std::cout << "best utility: " << result.y_star << "\n";
  std::cout << "simulated cost spent: " << result.total_cost << "\n";
  std::cout << "augmented observations added: " << result.n_augmented << "\n";
  return 0;
}
