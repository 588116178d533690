// Attention heatmap rendering. Darker cells mean more weight; every number
// shown comes from the server response, stored verbatim in data-weight.

const LIGHT: [number, number, number] = [237, 242, 247];
const DARK: [number, number, number] = [38, 59, 122];

/**
 * Color for one weight on a white-to-dark-blue ramp. Each channel falls
 * linearly as value/max grows, so cell darkness is monotone in the weight.
 */
export function heatColor(value: number, max: number): string {
  const t = max > 0 ? Math.min(Math.max(value / max, 0), 1) : 0;
  const channel = (i: number) =>
    Math.round(LIGHT[i]! + t * (DARK[i]! - LIGHT[i]!));
  return `rgb(${channel(0)}, ${channel(1)}, ${channel(2)})`;
}

export function renderHeatmap(
  container: HTMLElement,
  matrix: number[][],
  rowLabels: string[],
  columnLabels: string[],
): void {
  container.textContent = "";
  const max = Math.max(...matrix.flat(), 0);
  const table = document.createElement("table");
  table.className = "heatmap";

  const head = table.createTHead().insertRow();
  head.appendChild(document.createElement("th"));
  for (const label of columnLabels) {
    const th = document.createElement("th");
    th.textContent = label;
    head.appendChild(th);
  }

  const body = table.createTBody();
  matrix.forEach((row, i) => {
    const tr = body.insertRow();
    const th = document.createElement("th");
    th.textContent = rowLabels[i] ?? "";
    tr.appendChild(th);
    row.forEach((value, j) => {
      const td = tr.insertCell();
      td.className = "heatmap-cell";
      td.style.backgroundColor = heatColor(value, max);
      td.dataset.weight = String(value);
      td.title = `${rowLabels[i]} → ${columnLabels[j]}: ${value}`;
    });
  });

  container.appendChild(table);
  const readout = document.createElement("div");
  readout.className = "heatmap-readout";
  readout.textContent = "hover a cell";
  container.appendChild(readout);
  table.addEventListener("mouseover", (ev) => {
    const cell = ev.target as HTMLElement;
    if (cell.classList.contains("heatmap-cell")) {
      readout.textContent = cell.title;
    }
  });
}
