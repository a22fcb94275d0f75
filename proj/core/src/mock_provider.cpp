// Deterministic offline chat provider. Synthesis prompts yield four command
// lines drawn from a small grammar of command families; pair prompts rewrite
// the query into another member of its family that keeps the argument
// values; explanation prompts describe the family's purpose.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "cmdsim/command.hpp"
#include "cmdsim/llm.hpp"
#include "cmdsim/rng.hpp"

namespace cmdsim {
namespace {

struct Family {
  std::string_view purpose;
  std::vector<std::string_view> variants;
};

const std::vector<Family>& families() {
  static const std::vector<Family> kFamilies = {
      {"list the contents of a directory",
       {"dir {dir} /s /b", "Get-ChildItem -Path {dir} -Recurse -Force", "ls {dir}", "gci {dir} -Filter *{ext}"}},
      {"print the contents of a file",
       {"type {dir}\\{file}", "Get-Content -Path {dir}\\{file} -TotalCount {num}", "more {dir}\\{file}",
        "cat {dir}\\{file}"}},
      {"delete files from disk",
       {"del /f /q {dir}\\{file}", "Remove-Item -Path {dir}\\{file} -Force", "erase {dir}\\{file}",
        "rm {dir}\\{file} -Recurse"}},
      {"copy files to another location",
       {"copy {dir}\\{file} {dir}", "Copy-Item -Path {dir}\\{file} -Destination {dir}", "xcopy {dir} {dir} /e /h /y",
        "robocopy {dir} {dir} /mir /r:{num}"}},
      {"enumerate running processes",
       {"tasklist /v /fi \"IMAGENAME eq {proc}\"", "Get-Process -Name {proc} | Select-Object Id,CPU",
        "qprocess {user}", "wmic process where name='{proc}' get processid"}},
      {"terminate a running process",
       {"taskkill /f /im {proc}", "Stop-Process -Name {proc} -Force", "tskill {num}", "pskill {proc}"}},
      {"inspect the network configuration",
       {"ipconfig /all", "Get-NetIPConfiguration -Detailed", "netsh interface ip show config",
        "Get-NetIPAddress -InterfaceIndex {num}"}},
      {"identify the current user and privileges",
       {"whoami /priv", "quser {user}", "echo %USERDOMAIN%\\%USERNAME%", "[Security.Principal.WindowsIdentity]::GetCurrent().Name"}},
      {"query or control a Windows service",
       {"sc query {svc}", "Get-Service -Name {svc} | Format-List *", "net start {svc}", "Restart-Service -Name {svc} -Force"}},
      {"create a scheduled task for persistence",
       {"schtasks /create /tn {task} /tr {dir}\\{file} /sc daily /st 0{digit}:00",
        "Register-ScheduledTask -TaskName {task} -Action (New-ScheduledTaskAction -Execute {dir}\\{file})",
        "at 0{digit}:00 /every:M,T,W {dir}\\{file}"}},
      {"read a registry key",
       {"reg query {key} /s", "Get-ItemProperty -Path Registry::{key}", "regedit /e {dir}\\{file} {key}"}},
      {"download a remote file",
       {"certutil -urlcache -split -f {url} {dir}\\{file}", "bitsadmin /transfer job{num} /download /priority high {url} {dir}\\{file}",
        "Invoke-WebRequest -Uri {url} -OutFile {dir}\\{file}", "curl -o {dir}\\{file} {url}"}},
      {"test connectivity to a remote host",
       {"ping -n {digit} {ip}", "Test-Connection -ComputerName {ip} -Count {digit}", "tracert -d {ip}",
        "Test-NetConnection {ip} -Port {port}"}},
      {"map a network share",
       {"net use {drive}: \\\\{host}\\{share} /user:{user} /persistent:no",
        "New-PSDrive -Name {drive} -PSProvider FileSystem -Root \\\\{host}\\{share}", "pushd \\\\{host}\\{share}"}},
      {"search files for a text pattern",
       {"findstr /s /i \"{word}\" {dir}\\*{ext}", "Select-String -Path {dir}\\*{ext} -Pattern {word}",
        "find /i \"{word}\" {dir}\\{file}"}},
      {"collect system information",
       {"systeminfo /s {host} /fo list", "Get-ComputerInfo -Property Os*", "msinfo32 /report {dir}\\{file}",
        "Get-CimInstance Win32_OperatingSystem"}},
      {"change firewall rules",
       {"netsh advfirewall firewall add rule name={task} dir=in action=allow protocol=TCP localport={port}",
        "New-NetFirewallRule -DisplayName {task} -Direction Inbound -LocalPort {port} -Protocol TCP -Action Allow"}},
      {"compress files into an archive",
       {"tar -czf {dir}\\{file}.tgz {dir}", "Compress-Archive -Path {dir} -DestinationPath {dir}\\{file}.zip",
        "7z a {dir}\\{file}.7z {dir}", "makecab {dir}\\{file} {dir}\\{file}.cab"}},
      {"read Windows event logs",
       {"wevtutil qe Security /c:{num} /f:text", "Get-WinEvent -LogName Security -MaxEvents {num}",
        "Get-EventLog -LogName System -Newest {num}"}},
      {"shut down or restart the machine",
       {"shutdown /r /t {num} /f", "Restart-Computer -ComputerName {host} -Force", "Stop-Computer -Force"}},
      {"manage local user accounts",
       {"net user {user} P@ss{num} /add", "New-LocalUser -Name {user} -NoPassword", "wmic useraccount where name='{user}' get sid"}},
      {"run a script through an interpreter",
       {"powershell -ExecutionPolicy Bypass -File {dir}\\{file}", "pwsh -NoProfile -File {dir}\\{file}",
        "cscript //nologo {dir}\\{file}", "wscript {dir}\\{file}"}},
      {"load a DLL or installer package",
       {"rundll32 {dir}\\{file},DllRegisterServer", "regsvr32 /s {dir}\\{file}", "msiexec /i {dir}\\{file} /qn"}},
  };
  return kFamilies;
}

constexpr std::array kDirs = {"C:\\Users\\Public\\Documents", "C:\\Windows\\Temp", "C:\\ProgramData\\Cache",
                              "D:\\Backups", "C:\\Users\\alice\\Desktop", "C:\\inetpub\\wwwroot",
                              "%APPDATA%\\Microsoft", "C:\\Windows\\System32\\drivers\\etc", "E:\\Projects\\src"};
constexpr std::array kFileStems = {"report", "payload", "backup", "config", "notes", "setup", "update", "data", "invoice"};
constexpr std::array kExts = {".docx", ".dll", ".zip", ".ini", ".txt", ".msi", ".ps1", ".csv", ".exe", ".bat", ".log"};
constexpr std::array kHosts = {"fileserver01", "DC01", "web-prod-02", "backup-nas", "hr-laptop-17"};
constexpr std::array kIps = {"192.168.1.10", "10.0.0.5", "172.16.4.20", "8.8.8.8", "10.10.3.44"};
constexpr std::array kUsers = {"alice", "bob", "Administrator", "svc_backup", "jdoe"};
constexpr std::array kServices = {"Spooler", "wuauserv", "WinDefend", "BITS", "RemoteRegistry"};
constexpr std::array kProcs = {"notepad.exe", "chrome.exe", "explorer.exe", "lsass.exe", "winword.exe"};
constexpr std::array kKeys = {"HKLM\\Software\\Microsoft\\Windows\\CurrentVersion\\Run", "HKCU\\Software\\Classes",
                              "HKLM\\SYSTEM\\CurrentControlSet\\Services", "HKCU\\Environment"};
constexpr std::array kUrls = {"http://example.com/update.exe", "https://cdn.example.org/tools/agent.zip",
                              "http://203.0.113.7/a.ps1", "https://files.example.net/setup.msi"};
constexpr std::array kTasks = {"NightlyBackup", "UpdaterTask", "CleanupJob", "SyncAgent"};
constexpr std::array kShares = {"Shared", "Finance", "IT$", "C$"};
constexpr std::array kWords = {"password", "secret", "error", "admin", "token"};
constexpr std::array kDrives = {"X", "Y", "Z", "M"};

std::uint64_t fnv1a(std::string_view a, std::string_view b) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : a) h = (h ^ c) * 0x100000001b3ULL;
  h = (h ^ 0xff) * 0x100000001b3ULL;
  for (unsigned char c : b) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

template <std::size_t N>
std::string pick(const std::array<const char*, N>& options, Rng& rng) {
  return options[uniform_index(rng, N)];
}

// Fills {placeholders}. Values are consumed from `reuse` first so pair
// rewrites keep the query's argument values.
std::string render(std::string_view tpl, Rng& rng, std::vector<std::string>* reuse = nullptr) {
  std::string out;
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] != '{') {
      out.push_back(tpl[i++]);
      continue;
    }
    auto close = tpl.find('}', i);
    auto name = tpl.substr(i + 1, close - i - 1);
    i = close + 1;
    if (reuse != nullptr && !reuse->empty() && name != "digit" && name != "ext") {
      out += reuse->front();
      reuse->erase(reuse->begin());
      continue;
    }
    if (name == "dir") out += pick(kDirs, rng);
    else if (name == "file") out += pick(kFileStems, rng) + "_" + std::to_string(uniform_index(rng, 9000) + 1000) + pick(kExts, rng);
    else if (name == "ext") out += pick(kExts, rng);
    else if (name == "host") out += pick(kHosts, rng);
    else if (name == "ip") out += pick(kIps, rng);
    else if (name == "user") out += pick(kUsers, rng);
    else if (name == "svc") out += pick(kServices, rng);
    else if (name == "proc") out += pick(kProcs, rng);
    else if (name == "key") out += pick(kKeys, rng);
    else if (name == "url") out += pick(kUrls, rng);
    else if (name == "task") out += pick(kTasks, rng) + std::to_string(uniform_index(rng, 100));
    else if (name == "share") out += pick(kShares, rng);
    else if (name == "word") out += pick(kWords, rng);
    else if (name == "drive") out += pick(kDrives, rng);
    else if (name == "num") out += std::to_string(uniform_index(rng, 5000) + 1);
    else if (name == "port") out += std::to_string(uniform_index(rng, 60000) + 1024);
    else if (name == "digit") out += std::to_string(uniform_index(rng, 9) + 1);
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c);
  return out;
}

std::string leading_word(std::string_view text) {
  text = trim(text);
  auto end = text.find_first_of(" \t");
  return lower(text.substr(0, end));
}

struct Match {
  std::size_t family;
  std::size_t variant;
  // Placeholder values recovered from the query, in template order.
  std::vector<std::pair<std::string, std::string>> values;
};

struct CompiledVariant {
  std::size_t family;
  std::size_t variant;
  std::vector<std::string> names;
  std::regex pattern;
};

const std::vector<CompiledVariant>& compiled_variants() {
  static const std::vector<CompiledVariant> kCompiled = [] {
    std::vector<CompiledVariant> out;
    const auto& fams = families();
    for (std::size_t f = 0; f < fams.size(); ++f) {
      for (std::size_t v = 0; v < fams[f].variants.size(); ++v) {
        std::string_view tpl = fams[f].variants[v];
        std::string re = "^";
        std::vector<std::string> names;
        for (std::size_t i = 0; i < tpl.size();) {
          if (tpl[i] == '{') {
            auto close = tpl.find('}', i);
            names.emplace_back(tpl.substr(i + 1, close - i - 1));
            re += "(.+?)";
            i = close + 1;
            continue;
          }
          if (std::string_view("\\^$.|?*+()[]{}").find(tpl[i]) != std::string_view::npos) re.push_back('\\');
          re.push_back(tpl[i++]);
        }
        re += "$";
        out.push_back({f, v, std::move(names), std::regex(re, std::regex::icase)});
      }
    }
    return out;
  }();
  return kCompiled;
}

std::vector<std::string> literal_words(std::string_view tpl) {
  std::vector<std::string> words;
  std::string word;
  bool in_slot = false;
  for (char c : tpl) {
    if (c == '{') in_slot = true;
    if (!in_slot && c != ' ') word.push_back(static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c));
    if (c == '}') in_slot = false;
    if (c == ' ' && !word.empty()) {
      words.push_back(word);
      word.clear();
    }
  }
  if (!word.empty()) words.push_back(word);
  return words;
}

std::optional<Match> classify(std::string_view command) {
  std::string text(trim(command));
  for (const auto& cv : compiled_variants()) {
    std::smatch m;
    if (std::regex_match(text, m, cv.pattern)) {
      Match match{cv.family, cv.variant, {}};
      for (std::size_t i = 0; i < cv.names.size(); ++i) match.values.emplace_back(cv.names[i], m[i + 1].str());
      return match;
    }
  }
  // No template fits: same leading word, most shared literal words.
  auto word = leading_word(command);
  std::string lowered = lower(command);
  std::optional<Match> best;
  std::size_t best_score = 0;
  const auto& fams = families();
  for (std::size_t f = 0; f < fams.size(); ++f) {
    for (std::size_t v = 0; v < fams[f].variants.size(); ++v) {
      if (leading_word(fams[f].variants[v]) != word) continue;
      std::size_t score = 1;
      for (const auto& w : literal_words(fams[f].variants[v])) {
        if (lowered.find(w) != std::string::npos) ++score;
      }
      if (score > best_score) {
        best_score = score;
        best = Match{f, v, {}};
      }
    }
  }
  return best;
}

// Argument values of a command line: every word after the first that is not
// a switch.
std::vector<std::string> argument_values(std::string_view command) {
  std::vector<std::string> values;
  std::string word;
  bool first = true;
  auto flush = [&] {
    if (word.empty()) return;
    if (!first && word.front() != '/' && word.front() != '-' && word.find('|') == std::string::npos) {
      values.push_back(word);
    }
    first = false;
    word.clear();
  };
  for (char c : command) {
    if (c == ' ' || c == '\t') flush();
    else word.push_back(c);
  }
  flush();
  return values;
}

// Like render(), but placeholders take the value captured under the same
// name when there is one.
std::string render_named(std::string_view tpl, Rng& rng, const std::vector<std::pair<std::string, std::string>>& named) {
  std::map<std::string, std::vector<std::string>, std::less<>> pool;
  for (const auto& [name, value] : named) pool[name].push_back(value);
  std::map<std::string, std::size_t, std::less<>> used;
  std::string out;
  for (std::size_t i = 0; i < tpl.size();) {
    if (tpl[i] != '{') {
      out.push_back(tpl[i++]);
      continue;
    }
    auto close = tpl.find('}', i);
    std::string name(tpl.substr(i + 1, close - i - 1));
    i = close + 1;
    if (auto it = pool.find(name); it != pool.end()) {
      auto& n = used[name];
      out += it->second[std::min(n, it->second.size() - 1)];
      ++n;
    } else {
      out += render("{" + name + "}", rng);
    }
  }
  return out;
}

std::string synthesize(std::string_view prompt, std::string_view label) {
  Rng rng(fnv1a(prompt, label));
  const auto& fams = families();
  std::string out;
  for (std::size_t i = 0; i < kRequestedPerCall; ++i) {
    const auto& fam = fams[uniform_index(rng, fams.size())];
    auto tpl = fam.variants[uniform_index(rng, fam.variants.size())];
    out += "<CMD>" + render(tpl, rng) + "\n";
  }
  return out;
}

std::string similar(const std::string& query, std::string_view label) {
  Rng rng(fnv1a(query, label));
  auto match = classify(query);
  std::string rewritten;
  if (match) {
    const auto& fam = families()[match->family];
    std::size_t v = match->variant;
    if (fam.variants.size() > 1) {
      v = (v + 1 + uniform_index(rng, fam.variants.size() - 1)) % fam.variants.size();
    }
    if (!match->values.empty()) {
      rewritten = render_named(fam.variants[v], rng, match->values);
    } else {
      auto values = argument_values(query);
      rewritten = render(fam.variants[v], rng, &values);
    }
  }
  if (rewritten.empty() || canonical_dedup_key(rewritten) == canonical_dedup_key(query)) {
    rewritten = "cmd.exe /c \"" + std::string(trim(query)) + "\"";
  }
  return "<CMD>" + rewritten + "\n";
}

std::string explain(const std::string& command) {
  auto match = classify(command);
  auto values = argument_values(command);
  std::string target = values.empty() ? std::string("the local system") : values.front();
  if (match && !match->values.empty()) target = match->values.front().second;
  if (match) {
    return "This command line is used to " + std::string(families()[match->family].purpose) + ", targeting " +
           target + ".";
  }
  return "This command line runs " + leading_word(command) + " with " + std::to_string(values.size()) +
         " argument values.";
}

}  // namespace

std::string MockChatClient::complete(std::string_view prompt) {
  {
    std::lock_guard lock(mutex_);
    ++calls_;
  }
  auto decoded = decode_prompt(prompt);
  std::string_view label = spec_.endpoint;
  if (spec_.is_mock()) label.remove_prefix(7);
  switch (decoded.kind) {
    case PromptKind::synthesis:
      return synthesize(prompt, label);
    case PromptKind::pair:
      if (auto it = table_.find(decoded.slots.front()); it != table_.end()) return it->second;
      return similar(decoded.slots.front(), label);
    case PromptKind::explanation:
      if (auto it = table_.find(decoded.slots.front()); it != table_.end()) return it->second;
      return explain(decoded.slots.front());
    case PromptKind::unknown:
      break;
  }
  if (auto it = table_.find(std::string(prompt)); it != table_.end()) return it->second;
  return "I can only help with command line prompts.";
}

}  // namespace cmdsim
