#pragma once

#include "climcast/arima.hpp"
#include "climcast/error.hpp"
#include "climcast/ingest.hpp"
#include "climcast/lstm.hpp"
#include "climcast/metrics.hpp"
#include "climcast/optim/adam.hpp"
#include "climcast/optim/nelder_mead.hpp"
#include "climcast/random.hpp"
#include "climcast/series.hpp"
#include "climcast/snn.hpp"
#include "climcast/stattests.hpp"
#include "climcast/training.hpp"

#include "climcast/harness/compare.hpp"
#include "climcast/harness/config.hpp"
#include "climcast/harness/io.hpp"
#include "climcast/harness/pipeline.hpp"
#include "climcast/harness/plots.hpp"
#include "climcast/harness/run.hpp"
