// awgsim: scenario runner and board host.
//
//   awgsim run   --scenario f.scn [--seed N] [--out dir] [--transport loopback|tcp]
//                [--listen host:port | --connect host:port[,host:port...]]
//                [--emit csv|summary|both] [--threads N]
//   awgsim serve --scenario f.scn [--seed N] [--listen host:port] [--endpoints-file f] [--udp host:port]
//   awgsim check --program p.awgp
//
// Exit codes: 0 pass, 1 suite failure, 2 config or connection error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "awg/config_text.hpp"
#include "awg/error.hpp"
#include "awg/program_file.hpp"
#include "awg/scenario.hpp"
#include "awg/transport.hpp"

using namespace awg;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

// One endpoint per board: an explicit list, or consecutive ports from a base.
std::vector<Endpoint> board_endpoints(const std::string& spec, std::size_t boards)
{
    std::vector<Endpoint> out;
    for (const auto& s : cfg::split_list(spec))
        out.push_back(parse_endpoint(s));
    if (out.size() == 1 && boards > 1) {
        const Endpoint base = out[0];
        if (base.port != 0 && std::size_t(base.port) + boards - 1 > 65535)
            throw Error(Errc::ConfigError, "port range " + to_string(base) + " + " + std::to_string(boards) + " overflows");
        for (std::size_t i = 1; i < boards; ++i)
            out.push_back({base.host, static_cast<std::uint16_t>(base.port == 0 ? 0 : base.port + i)});
    }
    if (out.size() != boards)
        throw Error(Errc::ConfigError, "scenario has " + std::to_string(boards) + " boards but " +
                                           std::to_string(out.size()) + " endpoints were given");
    return out;
}

struct RunArgs {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string transport = "loopback";
    std::string listen;
    std::string connect;
    std::string emit = "both";
    unsigned threads = 1;
};

int cmd_run(const RunArgs& a)
{
    Scenario s = load_scenario(a.scenario);
    if (a.seed)
        s.seed = *a.seed;
    if (s.suites.empty()) {
        std::cout << "scenario " << s.name << ": no suites selected\n";
        return kExitPass;
    }
    const Emit emit = a.emit == "csv" ? Emit::Csv : a.emit == "summary" ? Emit::Summary : Emit::Both;
    const bool tcp = a.transport == "tcp" || !a.connect.empty();
    if (!a.connect.empty() && !a.listen.empty())
        throw Error(Errc::ConfigError, "--listen and --connect are exclusive");
    if (!tcp && !a.listen.empty())
        throw Error(Errc::ConfigError, "--listen needs --transport tcp");

    std::vector<std::unique_ptr<BoardServer>> servers;
    std::vector<std::unique_ptr<TcpServer>> listeners;
    std::vector<std::unique_ptr<AwgClient>> clients;
    if (!a.connect.empty()) {
        for (const auto& ep : board_endpoints(a.connect, s.boards()))
            clients.push_back(std::make_unique<AwgClient>(TcpTransport::connect(ep)));
    } else {
        for (std::size_t b = 0; b < s.boards(); ++b)
            servers.push_back(make_board_server(s, b));
        if (tcp) {
            const auto eps = board_endpoints(a.listen.empty() ? "127.0.0.1:0" : a.listen, s.boards());
            for (std::size_t b = 0; b < s.boards(); ++b) {
                listeners.push_back(std::make_unique<TcpServer>(*servers[b], eps[b]));
                listeners.back()->start();
                clients.push_back(std::make_unique<AwgClient>(TcpTransport::connect(listeners.back()->endpoint())));
            }
        } else {
            for (auto& srv : servers)
                clients.push_back(std::make_unique<AwgClient>(std::make_unique<LoopbackTransport>(*srv)));
        }
    }
    std::vector<AwgClient*> ptrs;
    for (auto& c : clients)
        ptrs.push_back(c.get());

    const auto report = run_scenario(s, ptrs, {a.threads});
    const std::string dir = a.out.empty() ? s.output_dir : a.out;
    write_reports(report, dir, emit);
    std::cout << report.summary();
    std::cout << "reports written to " << dir << "\n";
    return report.pass() ? kExitPass : kExitFail;
}

struct ServeArgs {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string listen = "127.0.0.1:5025";
    std::string endpoints_file;
    std::string udp;
};

int cmd_serve(const ServeArgs& a)
{
    Scenario s = load_scenario(a.scenario);
    if (a.seed)
        s.seed = *a.seed;
    std::optional<UdpStatusSender> udp;
    if (!a.udp.empty())
        udp.emplace(parse_endpoint(a.udp));
    std::vector<std::unique_ptr<BoardServer>> servers;
    std::vector<std::unique_ptr<TcpServer>> listeners;
    const auto eps = board_endpoints(a.listen, s.boards());
    std::string bound;
    for (std::size_t b = 0; b < s.boards(); ++b) {
        servers.push_back(make_board_server(s, b));
        if (udp)
            servers.back()->set_status_sink([&udp](const proto::StatusPacket& p) { udp->send(p); });
        listeners.push_back(std::make_unique<TcpServer>(*servers.back(), eps[b]));
        listeners.back()->start();
        bound += (b ? "," : "") + to_string(listeners.back()->endpoint());
    }
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    if (!a.endpoints_file.empty()) {
        // written whole then renamed, so a reader never sees half a list
        const std::string tmp = a.endpoints_file + ".tmp";
        std::ofstream(tmp) << bound << "\n";
        std::filesystem::rename(tmp, a.endpoints_file);
    }
    std::cout << "serving " << s.boards() << " board(s) for " << s.name << " on " << bound << std::endl;
    while (!g_stop)
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    for (auto& l : listeners)
        l->stop();
    return kExitPass;
}

int cmd_check(const std::string& path)
{
    const auto p = load_program(path);
    const auto r = validate_program(p.sdm, p.wdm);
    std::cout << path << ": " << p.sdm.size() << " entries, " << (r.ok() ? "valid" : r.describe()) << "\n";
    return r.ok() ? kExitPass : kExitFail;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-channel AWG simulator: scenario runner and board host"};
    app.require_subcommand(1);

    RunArgs run;
    auto* r = app.add_subcommand("run", "run a scenario's measurement suites");
    r->add_option("--scenario", run.scenario, "scenario file")->required();
    r->add_option("--seed", run.seed, "override the scenario seed");
    r->add_option("--out", run.out, "report directory (default: the scenario's output)");
    r->add_option("--transport", run.transport, "loopback or tcp")->check(CLI::IsMember({"loopback", "tcp"}));
    r->add_option("--listen", run.listen, "host in-process boards on host:port (tcp)");
    r->add_option("--connect", run.connect, "boards served elsewhere: host:port or a comma list");
    r->add_option("--emit", run.emit, "csv, summary or both")->check(CLI::IsMember({"csv", "summary", "both"}));
    r->add_option("--threads", run.threads, "boards measured in parallel by the jitter suite")
        ->check(CLI::Range(1u, 256u));

    ServeArgs serve;
    auto* sv = app.add_subcommand("serve", "host the scenario's boards over TCP until interrupted");
    sv->add_option("--scenario", serve.scenario, "scenario file")->required();
    sv->add_option("--seed", serve.seed, "override the scenario seed");
    sv->add_option("--listen", serve.listen, "host:port of board 0; board i listens on port + i");
    sv->add_option("--endpoints-file", serve.endpoints_file, "write the bound endpoints here once listening");
    sv->add_option("--udp", serve.udp, "send status packets to host:port");

    std::string program;
    auto* ck = app.add_subcommand("check", "parse and validate a program file");
    ck->add_option("--program", program, "program file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*r)
            return cmd_run(run);
        if (*sv)
            return cmd_serve(serve);
        return cmd_check(program);
    } catch (const Error& e) {
        std::cerr << "awgsim: " << e.what() << "\n";
        switch (e.code()) {
        case Errc::ConfigError:
        case Errc::ConnectionError:
        case Errc::ProtocolError:
        case Errc::RemoteError:
            return kExitConfig;
        default:
            return kExitFail;
        }
    } catch (const std::exception& e) {
        std::cerr << "awgsim: " << e.what() << "\n";
        return kExitConfig;
    }
}
