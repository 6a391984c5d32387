#pragma once

#include <iosfwd>
#include <string>

#include "sspn/spn.hpp"

// Line-oriented model format:
//
//   spn-model v1
//   root <id>
//   classes <K>
//   features <D>
//   classvar <var>
//   node <id> SUM <child>:<weight>,...
//   node <id> PROD <child>,...
//   node <id> GAUSS <var> <mean> <variance>
//   node <id> IND <var> <state>          (state is 1-based)
//
// Reals are written with 17 significant digits so write -> read -> write is
// byte-identical. Blank lines and lines starting with '#' are ignored.
namespace sspn {

std::string write_model(const Spn& spn);
void write_model(const Spn& spn, std::ostream& out);
void save_model(const Spn& spn, const std::string& path);

// Throws ParseError with the offending line number.
Spn read_model(std::istream& in);
Spn parse_model(const std::string& text);
Spn load_model(const std::string& path);

// "%.17g" formatting shared by every text output of the project.
std::string format_real(double v);

}  // namespace sspn
