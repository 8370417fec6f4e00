#pragma once

#include "madsel/error.hpp"
#include "madsel/features.hpp"
#include "madsel/forest.hpp"
#include "madsel/image.hpp"
#include "madsel/infotheory.hpp"
#include "madsel/layout.hpp"
#include "madsel/manifest.hpp"
#include "madsel/metrics.hpp"
#include "madsel/pipeline.hpp"
#include "madsel/protocol.hpp"
#include "madsel/rng.hpp"
#include "madsel/selection.hpp"
#include "madsel/store.hpp"
#include "madsel/synth.hpp"
#include "madsel/viz.hpp"
