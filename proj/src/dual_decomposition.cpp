#include <cmath>

#include "consensus_internal.hpp"
#include "emgrid/distributed.hpp"

namespace emgrid {

ConsensusResult run_dual_decomposition(const StepInstance& inst,
                                       const std::vector<IslandedSolution>& islanded,
                                       const DdSettings& settings, ConsensusContext* ctx,
                                       QpSettings qp) {
  if (!(settings.alpha0 > 0.0)) throw std::invalid_argument("alpha0 must be positive");
  if (!(settings.prox > 0.0)) throw std::invalid_argument("proximal weight must be positive");
  ConsensusContext local;
  ConsensusContext& c = ctx ? *ctx : local;
  detail::prepare_context(c, inst, islanded, qp);
  MessageBus bus(inst.graph);
  std::vector<LocalResult> last;
  std::vector<TraceRow> trace;
  bool converged = false;
  int nu = 0;
  long per_round = 0;
  while (nu < settings.nu_max) {
    ++nu;
    detail::RoundRule rule;
    rule.prox = settings.prox;
    rule.relax = 1.0;
    rule.dual_step = settings.alpha0 / std::sqrt(static_cast<double>(nu));
    rule.dual_only = true;
    RoundReport rep = detail::consensus_round(c.agents, c.states, bus, rule, settings.workers, last);
    per_round = rep.messages;
    for (size_t j = 0; j < rep.agents.size(); ++j) {
      const auto& a = rep.agents[j];
      trace.push_back({nu, static_cast<int>(j), a.primal, a.dual, a.objective});
    }
    if (rep.max_eps() <= settings.eps_term) {
      converged = true;
      break;
    }
  }
  ConsensusResult out = detail::collapse(inst, c.states, last);
  out.iterations = nu;
  out.converged = converged;
  out.messages = bus.sent();
  out.messages_per_round = per_round;
  out.trace = std::move(trace);
  out.final_states = c.states;
  c.warm = true;
  return out;
}

}  // namespace emgrid
