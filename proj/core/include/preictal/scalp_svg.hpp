#pragma once

#include <string>
#include <vector>

#include "preictal/montage.hpp"

namespace preictal {

// 2-D projection of the 10-20 positions used by the reduced montage, on a
// unit-radius head, y pointing to the nasion.
struct ElectrodePosition {
    const char* label;
    double x, y;
};
const std::vector<ElectrodePosition>& scalp_positions();

// Head outline with the 9 labeled electrodes and one straight edge per montage
// channel, in montage order. Edge opacity maps importance linearly from 10%
// (0.0) to 100% (1.0). Channel name and importance are embedded as
// data-channel / data-importance attributes; output bytes are deterministic.
std::string render_scalp_svg(const std::vector<double>& processed_importance,
                             const MontageConfig& montage, const std::string& title = "");

}  // namespace preictal
