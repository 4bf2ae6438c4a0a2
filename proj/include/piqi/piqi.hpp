#pragma once

#include "piqi/commands.hpp"
#include "piqi/container.hpp"
#include "piqi/evalkit.hpp"
#include "piqi/featpipe.hpp"
#include "piqi/features_csv.hpp"
#include "piqi/gpr.hpp"
#include "piqi/gradfeat.hpp"
#include "piqi/imgio.hpp"
#include "piqi/manifest.hpp"
#include "piqi/mscnfeat.hpp"
#include "piqi/stackens.hpp"
