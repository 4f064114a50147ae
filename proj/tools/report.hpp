#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace evtrojan::cli {

struct ReportRun {
  std::string name;
  nlohmann::json doc;
};

/// One bar per run for `metric`. Runs without the field are listed as "n/a";
/// an "inf" PSNR is drawn at full height. Output depends only on the inputs.
std::string bar_chart_svg(const std::vector<ReportRun>& runs, const std::string& metric,
                          const std::string& title);

}  // namespace evtrojan::cli
