#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "retscreen/pipeline/session.hpp"
#include "retscreen/stages/operating_point.hpp"

namespace retscreen::pipeline {

/// report.json for a session that is ready to report. PVI scores are rounded
/// to 6 decimal places; a diagnosis section appears only for PVI-positive eyes.
nlohmann::json build_report(const Session& session, const stages::OperatingPoint& op,
                            const std::string& generated_at);

/// Human-readable referral letter rendered from report.json.
std::string render_referral_letter(const nlohmann::json& report, const ReferralRecord& referral);

}  // namespace retscreen::pipeline
