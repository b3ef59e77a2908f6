import { mountBoard } from "./cards.js";

const root = document.querySelector<HTMLElement>("#app");
if (!root) {
  throw new Error("#app container missing");
}
mountBoard(root).catch((err) => {
  root.textContent = `Failed to load session: ${err}`;
});
