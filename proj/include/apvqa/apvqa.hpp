#pragma once

#include <apvqa/answer.hpp>
#include <apvqa/coco.hpp>
#include <apvqa/dataset_io.hpp>
#include <apvqa/error.hpp>
#include <apvqa/eval.hpp>
#include <apvqa/geometry.hpp>
#include <apvqa/png_io.hpp>
#include <apvqa/probe.hpp>
#include <apvqa/render.hpp>
#include <apvqa/rng.hpp>
#include <apvqa/sample.hpp>
#include <apvqa/synth.hpp>

namespace apvqa {
inline constexpr std::string_view kToolVersion = "1.0.0";
}
