#pragma once

#include "rolesynth/captions.hpp"
#include "rolesynth/collision.hpp"
#include "rolesynth/dataset_io.hpp"
#include "rolesynth/error.hpp"
#include "rolesynth/filter.hpp"
#include "rolesynth/gateway.hpp"
#include "rolesynth/generation.hpp"
#include "rolesynth/loss.hpp"
#include "rolesynth/matrix.hpp"
#include "rolesynth/mock_endpoint.hpp"
#include "rolesynth/positional.hpp"
#include "rolesynth/records.hpp"
#include "rolesynth/roles.hpp"
#include "rolesynth/scoring.hpp"
#include "rolesynth/training_config.hpp"
#include "rolesynth/verify.hpp"
