#pragma once

// Text form of a channel program, one command per line:
//
//   default_trigger external|software|timer
//   wdm <word> const <words> <code>
//   wdm <word> ramp <words> <from> <to>          inclusive endpoints
//   wdm <word> sine <words> <cycles> <amplitude>
//   wdm <word> samples <code> ...                 a multiple of 8 codes
//   entry start=<word> length=<words> [counter=<n>] [flags=wait,end,jump,hold]
//         [trigger=none|external|software|timer] [jump=<index>]
//
// Parsing checks syntax and memory bounds only; semantic validation is
// left to validate_program so that illegal programs can be expressed.

#include <string>
#include <string_view>

#include "awg/sync.hpp"

namespace awg {

/// Throws ConfigError with the line number.
ChannelProgram parse_program(std::string_view text, std::uint8_t channel = 0);
ChannelProgram load_program(const std::string& path, std::uint8_t channel = 0);

/// Inverse of parse_program: nonzero WDM words as `samples` lines, then the entries.
std::string format_program(const ChannelProgram& program);

const char* trigger_name(TriggerSource s) noexcept;
TriggerSource parse_trigger_name(const std::string& name);

} // namespace awg
