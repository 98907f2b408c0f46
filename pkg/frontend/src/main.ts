import { ApiClient } from "./api.js";
import { AnnotationApp } from "./app.js";

function requireParam(params: URLSearchParams, name: string): string | null {
    const value = params.get(name);
    return value && value.trim() ? value.trim() : null;
}

export function boot(root: HTMLElement, search: string = window.location.search): AnnotationApp | null {
    const params = new URLSearchParams(search);
    const annotatorId = requireParam(params, "annotator");
    const campaignId = requireParam(params, "campaign");
    if (!annotatorId || !campaignId) {
        root.innerHTML = "";
        const msg = document.createElement("div");
        msg.className = "error";
        msg.textContent =
            "Missing session parameters. Open this page as /?annotator=<id>&campaign=<id>.";
        root.append(msg);
        return null;
    }
    const app = new AnnotationApp(root, new ApiClient(""), { annotatorId, campaignId });
    void app.start();
    return app;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
    boot(document.getElementById("app") as HTMLElement);
}
