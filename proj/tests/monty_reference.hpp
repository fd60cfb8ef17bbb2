#pragma once

// Reference terminal configurations (1-based index, probability) for the
// Monty Hall programs from the all-zero state at label 1, and the nine
// (d,g) marginals after forgetting o and the label (two decimals).

#include <utility>
#include <vector>

namespace testing {

inline const std::vector<std::pair<int, double>> kStickTerminal = {
    {12, 0.074074}, {18, 0.037037}, {36, 0.11111},  {48, 0.11111},  {72, 0.11111},  {78, 0.037037},
    {90, 0.074074}, {96, 0.11111},  {120, 0.11111}, {132, 0.11111}, {150, 0.074074}, {156, 0.037037}};

inline const std::vector<std::pair<int, double>> kSwitchTerminal = {
    {18, 0.11111},  {27, 0.11111},  {54, 0.037037}, {72, 0.074074}, {108, 0.074074}, {117, 0.11111},
    {135, 0.11111}, {144, 0.037037}, {180, 0.037037}, {198, 0.074074}, {225, 0.11111}, {234, 0.11111}};

inline const std::vector<double> kStickMarginals = {0.11, 0.11, 0.11, 0.11, 0.11, 0.11, 0.11, 0.11, 0.11};
inline const std::vector<double> kSwitchMarginals = {0.22, 0.04, 0.07, 0.07, 0.22, 0.04, 0.04, 0.07, 0.22};

} // namespace testing
