#include "awg/program_file.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "awg/config_text.hpp"
#include "awg/error.hpp"

namespace awg {

namespace {

struct LineError {
    int line;
    std::string msg;
};

std::int64_t to_int(const std::string& tok, int line)
{
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size())
        throw LineError{line, "bad integer '" + tok + "'"};
    return v;
}

std::uint32_t to_u32(const std::string& tok, int line)
{
    const auto v = to_int(tok, line);
    if (v < 0 || v > 0xFFFFFFFFll)
        throw LineError{line, "'" + tok + "' out of range"};
    return static_cast<std::uint32_t>(v);
}

double to_double(const std::string& tok, int line)
{
    try {
        std::size_t used = 0;
        const double d = std::stod(tok, &used);
        if (used == tok.size() && std::isfinite(d))
            return d;
    } catch (const std::exception&) {
    }
    throw LineError{line, "bad number '" + tok + "'"};
}

SampleCode to_code(double v, int line)
{
    const double r = std::nearbyint(v);
    if (r < -32768 || r > 32767)
        throw LineError{line, "sample value out of the 16-bit range"};
    return static_cast<SampleCode>(r);
}

void fill(ChannelProgram& p, const std::vector<std::string>& tok, int line)
{
    if (tok.size() < 3)
        throw LineError{line, "wdm needs <word> <kind> ..."};
    const std::uint32_t off = to_u32(tok[1], line);
    const std::string& kind = tok[2];
    std::vector<SampleCode> s;
    auto need = [&](std::size_t n) {
        if (tok.size() != n)
            throw LineError{line, "wdm " + kind + " takes " + std::to_string(n - 3) + " arguments"};
    };
    auto words = [&] {
        const auto w = to_u32(tok[3], line);
        if (w == 0 || w > kWdmCapacityWords)
            throw LineError{line, "bad word count"};
        return std::size_t{w} * kSamplesPerWord;
    };
    if (kind == "const") {
        need(5);
        s.assign(words(), to_code(to_double(tok[4], line), line));
    } else if (kind == "ramp") {
        need(6);
        const std::size_t n = words();
        const double a = to_double(tok[4], line), b = to_double(tok[5], line);
        s.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            s[i] = to_code(n == 1 ? a : a + (b - a) * double(i) / double(n - 1), line);
    } else if (kind == "sine") {
        need(6);
        const std::size_t n = words();
        const double cycles = to_double(tok[4], line), amp = to_double(tok[5], line);
        s.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            s[i] = to_code(amp * std::sin(2 * std::numbers::pi * cycles * double(i) / double(n)), line);
    } else if (kind == "samples") {
        for (std::size_t i = 3; i < tok.size(); ++i)
            s.push_back(to_code(double(to_int(tok[i], line)), line));
        if (s.empty() || s.size() % kSamplesPerWord != 0)
            throw LineError{line, "samples needs a nonzero multiple of 8 codes"};
    } else {
        throw LineError{line, "unknown wdm kind '" + kind + "'"};
    }
    if (std::uint64_t(off) * kSamplesPerWord + s.size() > kWdmCapacitySamples)
        throw LineError{line, "waveform runs past the end of the WDM"};
    p.wdm.write(off, s);
}

SequenceEntry entry(const std::vector<std::string>& tok, int line)
{
    SequenceEntry e;
    bool have_start = false, have_length = false;
    for (std::size_t i = 1; i < tok.size(); ++i) {
        const auto eq = tok[i].find('=');
        if (eq == std::string::npos)
            throw LineError{line, "expected key=value, got '" + tok[i] + "'"};
        const std::string k = tok[i].substr(0, eq), v = tok[i].substr(eq + 1);
        if (k == "start") {
            e.start_addr = to_u32(v, line);
            have_start = true;
        } else if (k == "length") {
            e.length = to_u32(v, line);
            have_length = true;
        } else if (k == "counter") {
            e.counter = to_u32(v, line);
        } else if (k == "jump") {
            const auto j = to_u32(v, line);
            if (j > 0xFFFF)
                throw LineError{line, "jump index out of range"};
            e.jump_target = static_cast<std::uint16_t>(j);
        } else if (k == "trigger") {
            try {
                e.trigger = parse_trigger_name(v);
            } catch (const Error& err) {
                throw LineError{line, err.what()};
            }
        } else if (k == "flags") {
            for (const auto& f : cfg::split_list(v)) {
                if (f == "wait")
                    e.flags = e.flags | EntryFlag::WaitTrigger;
                else if (f == "end")
                    e.flags = e.flags | EntryFlag::EndOfSequence;
                else if (f == "jump")
                    e.flags = e.flags | EntryFlag::Jump;
                else if (f == "hold")
                    e.flags = e.flags | EntryFlag::HoldLast;
                else if (!f.empty())
                    throw LineError{line, "unknown flag '" + f + "'"};
            }
        } else {
            throw LineError{line, "unknown entry field '" + k + "'"};
        }
    }
    if (!have_start || !have_length)
        throw LineError{line, "entry needs start= and length="};
    return e;
}

} // namespace

const char* trigger_name(TriggerSource s) noexcept
{
    switch (s) {
    case TriggerSource::None: return "none";
    case TriggerSource::External: return "external";
    case TriggerSource::Software: return "software";
    case TriggerSource::InternalTimer: return "timer";
    }
    return "?";
}

TriggerSource parse_trigger_name(const std::string& name)
{
    for (auto s : {TriggerSource::None, TriggerSource::External, TriggerSource::Software, TriggerSource::InternalTimer})
        if (name == trigger_name(s))
            return s;
    throw Error(Errc::ConfigError, "unknown trigger source '" + name + "'");
}

ChannelProgram parse_program(std::string_view text, std::uint8_t channel)
{
    ChannelProgram p{SequenceMemory(channel), WaveformMemory(channel), {}};
    std::vector<SequenceEntry> entries;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    try {
        while (std::getline(in, raw)) {
            ++line;
            const auto hash = raw.find('#');
            if (hash != std::string::npos)
                raw.resize(hash);
            std::istringstream ls(raw);
            std::vector<std::string> tok;
            for (std::string t; ls >> t;)
                tok.push_back(t);
            if (tok.empty())
                continue;
            if (tok[0] == "wdm") {
                fill(p, tok, line);
            } else if (tok[0] == "entry") {
                if (entries.size() == kSdmCapacity)
                    throw LineError{line, "more than 4096 entries"};
                entries.push_back(entry(tok, line));
            } else if (tok[0] == "default_trigger") {
                if (tok.size() != 2)
                    throw LineError{line, "default_trigger takes one source"};
                try {
                    p.config.default_trigger = parse_trigger_name(tok[1]);
                } catch (const Error& err) {
                    throw LineError{line, err.what()};
                }
                if (p.config.default_trigger == TriggerSource::None)
                    throw LineError{line, "default_trigger cannot be none"};
            } else {
                throw LineError{line, "unknown command '" + tok[0] + "'"};
            }
        }
    } catch (const LineError& e) {
        throw Error(Errc::ConfigError, "program line " + std::to_string(e.line) + ": " + e.msg);
    }
    p.sdm.assign(std::move(entries));
    return p;
}

ChannelProgram load_program(const std::string& path, std::uint8_t channel)
{
    try {
        return parse_program(cfg::read_file(path), channel);
    } catch (const Error& e) {
        throw Error(Errc::ConfigError, path + ": " + e.what());
    }
}

std::string format_program(const ChannelProgram& p)
{
    std::ostringstream os;
    if (p.config.default_trigger != TriggerSource::External)
        os << "default_trigger " << trigger_name(p.config.default_trigger) << "\n";
    const auto s = p.wdm.samples();
    const std::size_t words = p.wdm.capacity_words();
    for (std::size_t w = 0; w < words;) {
        auto zero = [&](std::size_t k) {
            for (std::size_t i = 0; i < kSamplesPerWord; ++i)
                if (s[k * kSamplesPerWord + i] != 0)
                    return false;
            return true;
        };
        if (zero(w)) {
            ++w;
            continue;
        }
        std::size_t end = w;
        while (end < words && !zero(end) && end - w < 64)
            ++end;
        os << "wdm " << w << " samples";
        for (std::size_t i = w * kSamplesPerWord; i < end * kSamplesPerWord; ++i)
            os << ' ' << s[i];
        os << "\n";
        w = end;
    }
    for (const auto& e : p.sdm.entries()) {
        os << "entry start=" << e.start_addr << " length=" << e.length << " counter=" << e.counter;
        std::string flags;
        auto add = [&](EntryFlag f, const char* name) {
            if (e.has(f))
                flags += (flags.empty() ? "" : ",") + std::string(name);
        };
        add(EntryFlag::WaitTrigger, "wait");
        add(EntryFlag::EndOfSequence, "end");
        add(EntryFlag::Jump, "jump");
        add(EntryFlag::HoldLast, "hold");
        if (!flags.empty())
            os << " flags=" << flags;
        if (e.trigger != TriggerSource::None)
            os << " trigger=" << trigger_name(e.trigger);
        if (e.jump() || e.jump_target != 0)
            os << " jump=" << e.jump_target;
        os << "\n";
    }
    return os.str();
}

} // namespace awg
