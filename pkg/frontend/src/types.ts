// Shapes exchanged with the annotation service REST API.

export interface TaskView {
    task_id: string;
    campaign_id: string;
    campaign_kind: string;
    image_refs: string[];
    category: string | null;
    attribute: string | null;
    level: string | null;
    position: number;
    total: number;
    prompt?: string;
    pair?: [string, string];
    transition_label?: string;
    pair_position?: "left" | "right";
}

export interface UiConfig {
    api_base: string;
    show_prompt: boolean;
    score_labels: Record<string, string>;
}

export interface SubmitAck {
    stored: boolean;
    duplicate: boolean;
}

export interface Session {
    annotatorId: string;
    campaignId: string;
}
