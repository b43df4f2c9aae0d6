#pragma once

// Incremental knowledge-graph construction: blueprint-guided distillation,
// threshold-gated entity/relation resolution, metrics, and graph export.
// Umbrella header for everything except the HTTP backend (include
// kgforge/backend_factory.hpp or kgforge/remote_backend.hpp for that).

#include "kgforge/backend.hpp"
#include "kgforge/canonical.hpp"
#include "kgforge/core.hpp"
#include "kgforge/distiller.hpp"
#include "kgforge/entity_matcher.hpp"
#include "kgforge/errors.hpp"
#include "kgforge/graph_json.hpp"
#include "kgforge/integrator.hpp"
#include "kgforge/metrics.hpp"
#include "kgforge/mock_backend.hpp"
#include "kgforge/pipeline.hpp"
#include "kgforge/relation_matcher.hpp"
