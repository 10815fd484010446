import init, { nucleus, balance, states, decodeState } from "./pkg/mada_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function esc(s) {
  return String(s).replace(/[&<>]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;" })[c]);
}

function call(f) {
  const v = JSON.parse(f());
  if (v.error) throw new Error(v.error);
  return v;
}

function show(out, f) {
  try {
    out.innerHTML = f();
  } catch (e) {
    out.innerHTML = `<pre>${esc(e.message)}</pre>`;
  }
}

function table(head, rows) {
  const th = head.map((h) => `<th>${esc(h)}</th>`).join("");
  const tr = rows.map((r) => `<tr>${r.join("")}</tr>`).join("");
  return `<table><tr>${th}</tr>${tr}</table>`;
}

function runNucleus() {
  show($("nout"), () => {
    const v = call(() => nucleus($("nw").value, num("nk"), num("np")));
    const rows = v.probs.map((p, i) => [
      `<td>${i}</td>`,
      `<td>${p.toFixed(3)}</td>`,
      `<td class="${v.top_k.includes(i) ? "in" : ""}">${v.top_k.includes(i) ? "yes" : ""}</td>`,
      `<td class="${v.nucleus.includes(i) ? "in" : ""}">${v.nucleus.includes(i) ? "yes" : ""}</td>`,
    ]);
    return table(["token", "prob", "top-k", "nucleus"], rows) + `<p>nucleus mass ${v.nucleus_mass.toFixed(3)}</p>`;
  });
}

function dist(name, d) {
  const rows = d.actions.map((a) => [`<td>${esc(a.span)}</td>`, `<td>${a.prob.toFixed(4)}</td>`]);
  return `<h4>${name} (entropy ${d.entropy.toFixed(4)})</h4>` + table(["action", "P"], rows);
}

function runBalance() {
  show($("bout"), () => {
    const v = call(() => balance(num("b1"), num("b2"), BigInt(num("bs"))));
    return `<pre>${esc(v.state)}</pre>` + dist("raw", v.raw) + dist("augmented", v.augmented);
  });
}

function decoded(name, list) {
  const rows = list.map((a) => [`<td>${esc(a.span)}</td>`, `<td>${a.log_prob.toFixed(3)}</td>`]);
  return `<h4>${name}</h4>` + table(["action", "log P"], rows);
}

function runDecode() {
  show($("dout"), () => {
    const v = call(() =>
      decodeState(num("ds"), $("dm").value, num("dn"), num("dg"), num("dk"), num("dp"), BigInt(num("dseed"))),
    );
    const valid = `<h4>valid actions seen in data</h4><pre>${v.valid.map(esc).join("\n")}</pre>`;
    return valid + decoded("raw", v.raw) + decoded("augmented", v.augmented);
  });
}

await init();
JSON.parse(states()).forEach((k, i) => {
  const o = document.createElement("option");
  o.value = i;
  o.textContent = k;
  $("ds").appendChild(o);
});
$("ds").value = 1;
$("nrun").onclick = runNucleus;
$("brun").onclick = runBalance;
$("drun").onclick = runDecode;
runNucleus();
runBalance();
runDecode();
