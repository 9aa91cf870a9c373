#pragma once

// Everything in formlab.
#include "formlab/baselines/bc.hpp"
#include "formlab/baselines/bco.hpp"
#include "formlab/baselines/gaifo.hpp"
#include "formlab/common/error.hpp"
#include "formlab/common/rng.hpp"
#include "formlab/common/types.hpp"
#include "formlab/density/effect_model.hpp"
#include "formlab/density/gmm.hpp"
#include "formlab/density/standardizer.hpp"
#include "formlab/envs/dataset.hpp"
#include "formlab/envs/distractor.hpp"
#include "formlab/envs/env.hpp"
#include "formlab/envs/experts.hpp"
#include "formlab/envs/lqr.hpp"
#include "formlab/envs/rollout.hpp"
#include "formlab/form/reward.hpp"
#include "formlab/form/trainer.hpp"
#include "formlab/harness/commands.hpp"
#include "formlab/harness/config.hpp"
#include "formlab/harness/metrics.hpp"
#include "formlab/harness/plot.hpp"
#include "formlab/nn/adam.hpp"
#include "formlab/nn/binary_io.hpp"
#include "formlab/nn/checkpoint.hpp"
#include "formlab/nn/concat_net.hpp"
#include "formlab/nn/dense_net.hpp"
#include "formlab/rl/critic.hpp"
#include "formlab/rl/gaussian_policy.hpp"
#include "formlab/rl/learner.hpp"
#include "formlab/rl/mpo.hpp"
#include "formlab/rl/reinforce.hpp"
#include "formlab/rl/replay.hpp"
#include "formlab/rl/retrace.hpp"
#include "formlab/verify/gaussian_kl.hpp"
#include "formlab/verify/lingauss_oracle.hpp"
#include "formlab/verify/suite.hpp"
#include "formlab/verify/tiny_mdp.hpp"
