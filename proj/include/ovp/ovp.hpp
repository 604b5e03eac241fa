#pragma once

#include "ovp/box.hpp"
#include "ovp/data.hpp"
#include "ovp/error.hpp"
#include "ovp/eval.hpp"
#include "ovp/focal.hpp"
#include "ovp/head.hpp"
#include "ovp/inference.hpp"
#include "ovp/io.hpp"
#include "ovp/pipeline.hpp"
#include "ovp/retrieval.hpp"
#include "ovp/rng.hpp"
#include "ovp/synth.hpp"
#include "ovp/train.hpp"
