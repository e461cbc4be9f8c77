#pragma once
// Umbrella header for the whole library.

#include "glassvqa/abduction.hpp"
#include "glassvqa/backend.hpp"
#include "glassvqa/cache.hpp"
#include "glassvqa/canonical.hpp"
#include "glassvqa/clues.hpp"
#include "glassvqa/config.hpp"
#include "glassvqa/dataset.hpp"
#include "glassvqa/errors.hpp"
#include "glassvqa/evalkit.hpp"
#include "glassvqa/graph_export.hpp"
#include "glassvqa/http_backends.hpp"
#include "glassvqa/mock_backends.hpp"
#include "glassvqa/reasoner.hpp"
#include "glassvqa/retry.hpp"
#include "glassvqa/sha256.hpp"
#include "glassvqa/types.hpp"
