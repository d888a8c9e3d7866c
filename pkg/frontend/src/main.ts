// Browser entry point: connect to the engine and mount the studio.

import { buildStudio } from "./app.js";
import { StudioSocket } from "./ws.js";

const params = new URLSearchParams(location.search);
const endpoint =
  params.get("ws") ?? `ws://${location.hostname}:${params.get("port") ?? "8765"}`;

const socket = new StudioSocket(() => new WebSocket(endpoint) as any);
const root = document.getElementById("studio");
if (!root) throw new Error("missing #studio mount point");

const studio = buildStudio(root, socket);
socket.connect();

// handy for poking around from the devtools console
(window as any).studio = studio;
