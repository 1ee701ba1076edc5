// Streams draws from the paw target through a WFR flow and reports the
// final distance to the truth.

#include <iostream>

#include "nsflows/nsflows.hpp"

int main() {
  using namespace nsflows;

  ExperimentConfig cfg;
  cfg.flow.particles = 30;
  const FlowContext ctx = cfg.context();
  const GaussianMixture truth = fixtures::paw();

  Rng data_rng(derive_seed(42, seed_tag::data));
  const Matrix data = truth.sample(300, data_rng);
  Rng init_rng(derive_seed(42, seed_tag::init));
  const ParticleMeasure init = init_particles(cfg.prior, cfg.flow.particles, init_rng);

  Rng flow_rng(derive_seed(42, seed_tag::flow));
  const FlowRun run = run_flow(data, init, ctx, cfg.flow, flow_rng, [](const FlowState& s, RunRecord&) {
    if (s.step % 100 == 0) std::cout << "step " << s.step << "  ESS " << s.diagnostics.ess << '\n';
  });

  Rng ref_rng(derive_seed(42, seed_tag::reference));
  std::cout << "W2 to truth: " << w2_to_truth(run.state.measure, truth, 1000, ref_rng) << '\n';
}
