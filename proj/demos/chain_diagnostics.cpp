// Runs several chains on one synthetic corpus and prints the rolling shrink
// factor of the residual norm.
//
//   demo_chain_diagnostics [chains] [iters] [step]

#include <cstdio>
#include <cstdlib>

#include "shdp/shdp.hpp"

int main(int argc, char** argv) {
  using namespace shdp;
  const int chains = argc > 1 ? std::atoi(argv[1]) : 4;
  const int iters = argc > 2 ? std::atoi(argv[2]) : 400;
  const std::size_t step = argc > 3 ? std::strtoul(argv[3], nullptr, 10) : 50;

  SyntheticSpec spec;
  spec.topics = block_topics(5, 50, 0.1);
  spec.eta = {-4.0, -2.0, 0.0, 2.0, 4.0};
  Rng data_rng(7);
  const auto corpus = generate_synthetic(spec, 200, data_rng).corpus;

  std::vector<ChainTrace> traces;
  for (int c = 0; c < chains; ++c) {
    SamplerConfig cfg;
    cfg.train_iters = iters;
    cfg.seed = derive_seed(7, {static_cast<std::uint64_t>(c)});
    traces.push_back(run_chain(corpus, cfg, ResponseModel{}).trace);
    std::printf("chain %d: final K = %d, residual = %.3f\n", c, traces.back().records.back().num_topics,
                traces.back().records.back().residual_l2);
  }
  for (const auto& p : rolling_shrink(traces, "residual_l2", step)) {
    std::printf("%6zu  %.4f\n", p.iteration, p.value);
  }
  return 0;
}
