#pragma once

#include "dgs/autodiff.hpp"
#include "dgs/checkpoint.hpp"
#include "dgs/config.hpp"
#include "dgs/data.hpp"
#include "dgs/graph.hpp"
#include "dgs/matrix.hpp"
#include "dgs/metrics.hpp"
#include "dgs/optimizer.hpp"
#include "dgs/pipeline.hpp"
#include "dgs/random.hpp"
#include "dgs/svdd.hpp"
#include "dgs/synthetic.hpp"
#include "dgs/temporal.hpp"
#include "dgs/vgae.hpp"
