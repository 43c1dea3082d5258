#pragma once

#include "ggl/error.hpp"
#include "ggl/tensor.hpp"
#include "ggl/nn.hpp"
#include "ggl/container.hpp"
#include "ggl/generator.hpp"
#include "ggl/defense.hpp"
#include "ggl/client.hpp"
#include "ggl/optim/common.hpp"
#include "ggl/optim/cmaes.hpp"
#include "ggl/optim/fd_adam.hpp"
#include "ggl/optim/turbo.hpp"
#include "ggl/adversary.hpp"
#include "ggl/metrics.hpp"
#include "ggl/image_io.hpp"
#include "ggl/config.hpp"
#include "ggl/report.hpp"
#include "ggl/experiment.hpp"
#include "ggl/selftest.hpp"
