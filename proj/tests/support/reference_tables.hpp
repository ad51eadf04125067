#ifndef DTCD_TESTS_REFERENCE_TABLES_HPP
#define DTCD_TESTS_REFERENCE_TABLES_HPP

// Reference change-detection results on the WHU building dataset, in percent.

#include <array>
#include <string_view>

namespace dtcd::testing {

struct ReferenceRow {
  std::string_view method;
  double recall, precision, f1, iou;
};

inline constexpr std::array<ReferenceRow, 11> kReferenceRows = {{
    // ablation
    {"SCDN", 88.82, 71.81, 79.42, 65.86},
    {"SCDN+DAM", 87.00, 79.22, 82.93, 70.84},
    {"SCDN+DAM+FL", 82.36, 84.63, 83.48, 71.65},
    {"SCDN+DAM+CDL", 87.45, 80.94, 84.07, 72.51},
    {"SCDN+DAM+CDL+SSN", 89.63, 88.29, 88.95, 80.12},
    {"SCDN+DAM+CDL+SSN+DA", 89.35, 90.15, 89.75, 81.40},
    // method comparison
    {"Improved-SegNet", 78.28, 88.23, 82.96, 70.88},
    {"FC-EF", 82.03, 82.72, 82.37, 70.03},
    {"FC-Siam-conc", 74.46, 73.68, 74.07, 58.82},
    {"FC-Siam-diff", 84.74, 89.05, 86.84, 76.74},
    {"full model", 89.35, 90.15, 89.75, 81.40},
}};

}  // namespace dtcd::testing

#endif
