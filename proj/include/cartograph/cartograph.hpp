#pragma once

#include "cartograph/common.hpp"
#include "cartograph/corpus.hpp"
#include "cartograph/embedding.hpp"
#include "cartograph/projection.hpp"
#include "cartograph/clustering.hpp"
#include "cartograph/topics.hpp"
#include "cartograph/geometry.hpp"
#include "cartograph/pipeline.hpp"
#include "cartograph/frames.hpp"
#include "cartograph/dpo.hpp"
#include "cartograph/service.hpp"
