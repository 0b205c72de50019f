#pragma once

// Umbrella header for the core library.

#include "scidc/common.hpp"
#include "scidc/token/regex.hpp"
#include "scidc/token/vocabulary.hpp"
#include "scidc/token/automaton.hpp"
#include "scidc/token/mask.hpp"
#include "scidc/ir/program.hpp"
#include "scidc/ir/parser.hpp"
#include "scidc/ir/serializer.hpp"
#include "scidc/ir/lint.hpp"
#include "scidc/backend/backend.hpp"
#include "scidc/backend/mock.hpp"
#include "scidc/backend/callback.hpp"
#include "scidc/backend/remote.hpp"
#include "scidc/backend/stub_server.hpp"
#include "scidc/engine/engine.hpp"
#include "scidc/engine/checker.hpp"
#include "scidc/compiler/pipeline.hpp"
#include "scidc/eval/harness.hpp"
#include "scidc/eval/builders.hpp"
