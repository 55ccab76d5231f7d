#pragma once

#include "emgrid/distributed.hpp"

namespace emgrid::detail {

struct RoundRule {
  double rho = 0.0;         // augmentation weight in the local programs
  double prox = 0.0;        // proximal weight around the current angles
  double relax = 1.0;       // theta += relax * (theta_bar - theta)
  double dual_step = 0.0;   // multiplier step
  bool dual_only = false;   // residual = consensus violation only
};

RoundReport consensus_round(std::vector<Agent>& agents, std::vector<AgentState>& states,
                            MessageBus& bus, const RoundRule& rule, int workers,
                            std::vector<LocalResult>& last);

/// Sets up agents and states in `ctx` for the instance (warm or zero start).
void prepare_context(ConsensusContext& ctx, const StepInstance& inst,
                     const std::vector<IslandedSolution>& islanded, const QpSettings& qp);

ConsensusResult collapse(const StepInstance& inst, const std::vector<AgentState>& states,
                         const std::vector<LocalResult>& last);

}  // namespace emgrid::detail
