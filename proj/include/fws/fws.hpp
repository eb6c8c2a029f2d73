#pragma once

// Umbrella header for the whole toolkit.

#include "fws/adam.hpp"
#include "fws/bytes.hpp"
#include "fws/collab.hpp"
#include "fws/config_parse.hpp"
#include "fws/container.hpp"
#include "fws/csi.hpp"
#include "fws/dataset.hpp"
#include "fws/episodes.hpp"
#include "fws/errors.hpp"
#include "fws/experiment.hpp"
#include "fws/fsl.hpp"
#include "fws/grid.hpp"
#include "fws/kvconfig.hpp"
#include "fws/legacy.hpp"
#include "fws/library.hpp"
#include "fws/model_io.hpp"
#include "fws/net.hpp"
#include "fws/preprocess.hpp"
#include "fws/rng.hpp"
#include "fws/tensor.hpp"
#include "fws/train.hpp"
#include "fws/version.hpp"
